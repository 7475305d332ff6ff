//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no input events")]
    NoData,

    #[error("rejection sampling accepted zero events; estimate undefined")]
    NoAcceptedSamples,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("rejected record at line {line}: {message}")]
    InvalidRecord { line: usize, message: String },

    #[error("enumeration budget exceeded: {required} branches > budget {budget}")]
    BranchBudget { required: u64, budget: u64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
