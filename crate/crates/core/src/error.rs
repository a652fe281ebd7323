use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument or configuration value lies outside its valid domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    /// Not enough input to run the requested operation.
    #[error("insufficient data: need {needed} {unit}, got {available}")]
    InsufficientData {
        needed: u64,
        available: u64,
        unit: &'static str,
    },

    #[error("insufficient seed: need {needed} bits, got {available}")]
    InsufficientSeed { needed: usize, available: usize },

    #[error("zero variance input")]
    ZeroVariance,

    #[error("empty input")]
    Empty,

    /// Malformed file contents.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Violated internal invariant.
    #[error("internal assertion failed: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
