use thiserror::Error;

/// Errors raised by models, statistics, and test procedures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("sample size {got} is too small (need at least {need})")]
    SampleSize { got: usize, need: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("efficiency is undefined when the mean shift is zero")]
    UndefinedEfficiency,

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
