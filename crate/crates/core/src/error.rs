//! Crate-wide error type.

use crate::trace::RunTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An operation needed exact problem data (true `g`, `∇F`, solution set)
    /// but the oracle does not carry any.
    #[error("exact problem data is not available for this oracle")]
    TruthUnavailable,

    /// An iterate left the trust region (nonfinite or |coordinate| > 1e12).
    /// When raised from a full run the trace recorded so far is attached.
    #[error("iterates diverged at iteration {k}")]
    Diverged {
        k: u64,
        partial: Option<Box<RunTrace>>,
    },

    #[error("problem construction failed: {0}")]
    Construction(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
