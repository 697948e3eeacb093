use thiserror::Error;

/// Errors raised anywhere in the decoding pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("invalid structure: {0}")]
    Structure(String),
    #[error("column {column} has no graphlike decomposition: {reason}")]
    Decomposition { column: usize, reason: String },
    #[error("decode failed: {0}")]
    Decode(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("threshold estimation failed: {0}")]
    Estimation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn parameter<T>(message: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(message.into()))
}
