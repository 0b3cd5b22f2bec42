use thiserror::Error;

/// Errors raised while building or running a waveform configuration.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("unsupported prototype filter: {0}")]
    UnsupportedFilter(String),

    #[error("singular compensation at subcarrier {index}: c = {value:e}")]
    SingularCompensation { index: usize, value: f64 },

    #[error("chirp configuration infeasible: 2(f_max + xi)(l_max + 1) + l_max = {lhs} exceeds P = {p}")]
    Infeasible { lhs: f64, p: usize },

    #[error("regularized system is singular")]
    SingularSystem,

    #[error("signal has zero energy")]
    ZeroEnergy,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
