use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("model configuration: {0}")]
    ModelConfig(String),

    #[error("numerical integration did not converge: {0}")]
    Integration(String),

    #[error("rejection envelope too small: intensity {value} exceeds envelope {envelope}")]
    EnvelopeTooSmall { value: f64, envelope: f64 },

    #[error("unsupported noise model: {0}")]
    UnsupportedNoise(String),

    #[error("posterior has no draws")]
    EmptyPosterior,

    #[error("no in-domain draw after {0} attempts")]
    RetriesExhausted(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
