use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("CSV schema mismatch in {path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] sirlab_core::Error),

    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("thread pool: {0}")]
    Threads(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub(crate) fn validation(msg: impl Into<String>) -> HarnessError {
    HarnessError::Validation(msg.into())
}
