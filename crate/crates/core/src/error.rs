use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent sizes or invalid parameters supplied by the caller.
    #[error("configuration error: {0}")]
    Config(String),

    /// A probability table violates its invariants.
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    /// A kernel file failed validation at a specific row.
    #[error("parse error in row {row}: {msg}")]
    Row { row: usize, msg: String },

    /// Malformed input data.
    #[error("parse error: {0}")]
    Parse(String),

    /// Problem size exceeds what the exact routines handle.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// An iterative routine failed to produce a usable result.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
