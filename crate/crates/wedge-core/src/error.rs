//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by tensor construction, sampling, and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dense materialization of {requested} entries exceeds the cap of {cap}")]
    DenseCapExceeded { requested: u128, cap: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("index {index:?} out of range for shape {shape:?}")]
    IndexOutOfRange { index: Vec<usize>, shape: Vec<usize> },

    #[error("invalid mode {mode} for order-{order} tensor")]
    InvalidMode { mode: usize, order: usize },

    #[error("sampling rate {rate} outside (0, 1]")]
    InvalidRate { rate: f64 },

    #[error("index space of {total} elements overflows the supported encoding")]
    IndexOverflow { total: u128 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("matrix has numerical rank 0")]
    ZeroRank,

    #[error("rank deficiency in mode {mode}: requested rank {requested}, dimension {dim}")]
    ModeRankFailure { mode: usize, requested: usize, dim: usize },

    #[error("factor retrieval kept only {survivors} of {needed} candidates; raise the probe count")]
    RetrievalFailure { survivors: usize, needed: usize },

    #[error("gradient descent diverged at iteration {iteration} (objective grew past 10x its minimum)")]
    Divergence { iteration: usize },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Attach a path to a raw I/O error.
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
