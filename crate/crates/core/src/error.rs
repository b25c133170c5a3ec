use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the pipeline reports. The CLI maps each variant onto its own
/// exit code through [`Error::category`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("corrupt {kind}: {msg}")]
    Corrupt { kind: &'static str, msg: String },

    #[error("checkpoint architecture hash mismatch (expected {expected}, found {found})")]
    HashMismatch { expected: String, found: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("i/o error: {0}")]
    Stream(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-parsable tag for the error family.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Shape(_) => "shape",
            Error::OutOfRange(_) => "range",
            Error::NonFinite(_) => "numeric",
            Error::InvalidInput(_) => "input",
            Error::Corrupt { .. } => "corrupt",
            Error::HashMismatch { .. } => "hash-mismatch",
            Error::Io { .. } | Error::Stream(_) => "io",
            Error::Json(_) => "config",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn corrupt(kind: &'static str, msg: impl Into<String>) -> Self {
        Error::Corrupt { kind, msg: msg.into() }
    }
}
