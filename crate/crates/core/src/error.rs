use thiserror::Error;

/// Errors produced while validating inputs or evaluating a switch model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("k >= 3 required (got k = {0})")]
    TooFewLinks(u32),
    #[error("k <= {max} required (got k = {k})")]
    TooManyLinks { k: u32, max: u32 },
    #[error("mu must be positive and finite (got {0})")]
    NonPositiveRate(f64),
    #[error("alpha must be nonnegative and finite (got {0})")]
    InvalidDecoherence(f64),
    #[error("buffer size must be 1 or 2 (got {0})")]
    UnsupportedBuffer(u8),
    #[error("{name} = {value} is outside [0, 1]")]
    ProbabilityOutOfRange { name: &'static str, value: f64 },
    #[error("r1 must be 0 for B=2 (got r1 = {0})")]
    R1WithBufferTwo(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("stationary system is singular or ill-conditioned (condition estimate {condition:e})")]
    Singular { condition: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
