use thiserror::Error;

/// Errors produced by the scoring pipeline, the trainer and the harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid response: {0}")]
    InvalidResponse(String),
    #[error("invalid log-probability {value} at position {index}")]
    InvalidLogProb { index: usize, value: f64 },
    #[error("empty group")]
    EmptyGroup,
    #[error("temperature scaling factor must be positive, got {0}")]
    InvalidTemperature(f64),
    #[error("clip divisor tau must be positive, got {0}")]
    InvalidTau(f64),
    #[error("bonus weight omega must be non-negative, got {0}")]
    InvalidOmega(f64),
    #[error("step {step} outside schedule range [0, {total}]")]
    InvalidStep { step: usize, total: usize },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("noise magnitude must be positive, got {0}")]
    InvalidNoise(f64),
    #[error("group size must be at least 1, got {0}")]
    InvalidGroupSize(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("no visited states")]
    EmptyBatch,
    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
