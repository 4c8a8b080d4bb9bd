use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulator and optimizer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// A gradient or model entry became NaN or infinite.
    #[error("numerical divergence: {0}")]
    NumericalDivergence(String),

    /// Every packet of the round was lost; the caller skips the update.
    #[error("empty round: no gradient packet was received")]
    EmptyRound,

    /// No decision in the admissible box satisfies the delay and energy budgets.
    #[error("device {device} infeasible: {reason}")]
    Infeasible { device: usize, reason: String },

    #[error("malformed packet: {0}")]
    MalformedPacket(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
