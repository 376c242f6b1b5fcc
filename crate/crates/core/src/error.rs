use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid data at row {row}: {message}")]
    Data { row: usize, message: String },
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("underdetermined fit: {0}")]
    Underdetermined(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),
    #[error("incomplete tape: expected {expected} trials, recorded {recorded}")]
    IncompleteTape { expected: usize, recorded: usize },
    #[error("missing simulator latents for animal {0}")]
    MissingLatents(String),
    #[error("model file corrupt: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
