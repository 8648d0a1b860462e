use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A simulation or test configuration cannot produce a meaningful answer.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// Input data does not satisfy the model's structural assumptions.
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

macro_rules! domain {
    ($($arg:tt)*) => { $crate::Error::Domain(format!($($arg)*)) };
}

macro_rules! config {
    ($($arg:tt)*) => { $crate::Error::Config(format!($($arg)*)) };
}

pub(crate) use config;
pub(crate) use domain;
