use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The problem has no meaningful solution (zero fission source, zero
    /// production, singular loss matrix).
    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid sample {index}: {reason}")]
    InvalidSample { index: usize, reason: String },

    #[error("fixed-source solve for sample {index} did not converge")]
    SampleNotConverged { index: usize },

    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("file format error: {0}")]
    Format(String),

    #[error("checksum mismatch")]
    Checksum,

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
