//! Fraud scoring on a time-respecting session graph.
//!
//! Sessions are linked past-to-future on shared account, device and IP
//! identifiers inside a time window, keeping only the most recent
//! predecessors per identifier type. On top of that graph the crate computes
//! label features restricted to labels known at scoring time, samples
//! layered ego-batches, and trains GraphSAGE-style encoders with a small
//! reverse-mode tensor engine.

mod codec;
pub mod config;
pub mod error;
pub mod graph;
pub mod harness;
pub mod io;
pub mod labelprop;
pub mod models;
pub mod sampler;
pub mod session;
pub mod snapshot;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use graph::{build_graph, Edge, GraphConfig, TemporalGraph};
pub use labelprop::{augment_inputs, available_set, label_features, LabelFeatures};
pub use models::{Model, ModelConfig, Variant};
pub use sampler::{full_neighborhood_batch, sample_ego_batch, EgoBatch, SamplerConfig};
pub use session::{EdgeType, NodeId, Session, NEVER};
pub use tensor::Matrix;
