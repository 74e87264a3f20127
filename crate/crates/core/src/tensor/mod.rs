//! Dense 64-bit tensors with reverse-mode differentiation.

mod matrix;
mod optim;
mod params;
mod tape;

pub use matrix::Matrix;
pub use optim::{Adam, AdamConfig};
pub use params::{ParamSet, PARAMS_MAGIC, PARAMS_VERSION};
pub use tape::{Gradients, Segments, Tape, Var};
