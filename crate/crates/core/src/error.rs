use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid session {index}: {reason}")]
    InvalidSession { index: usize, reason: String },

    #[error("session {index}: feature dimension {found}, expected {expected}")]
    FeatureDim {
        index: usize,
        expected: usize,
        found: usize,
    },

    #[error("no sessions supplied")]
    Empty,

    #[error("unknown node id {0}")]
    UnknownNode(usize),

    #[error("out-of-order insert: session at t={t} precedes latest t={latest}")]
    OutOfOrder { t: i64, latest: i64 },

    #[error("invalid graph config: {0}")]
    GraphConfig(String),

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("config error: {0}")]
    Config(String),

    #[error("degenerate split: {0}")]
    Split(String),

    #[error("metric undefined: {0}")]
    Metric(String),

    #[error("training diverged at epoch {epoch}, step {step}: loss = {loss}")]
    Divergence { epoch: usize, step: usize, loss: f64 },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Whether the error stems from bad input data rather than configuration.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidSession { .. }
                | Error::FeatureDim { .. }
                | Error::Empty
                | Error::UnknownNode(_)
                | Error::OutOfOrder { .. }
                | Error::Snapshot(_)
                | Error::Checkpoint(_)
                | Error::Parse { .. }
                | Error::Split(_)
                | Error::Metric(_)
                | Error::Io(_)
        )
    }
}
