use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid boundary specification: {0}")]
    InvalidBoundary(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operator is not symmetric")]
    NotSymmetric,

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("design violates admissible set: {0}")]
    ConstraintViolation(String),

    #[error("non-finite value produced by nonlinearity")]
    NumericalOverflow,

    #[error("solution blew up at time step {step}")]
    BlowUp { step: usize },

    #[error("bound not applicable: {0}")]
    NotApplicable(String),

    #[error("time grid mismatch: {0}")]
    TimeGridMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("riccati integration failed at step {step}: {reason}")]
    Riccati { step: usize, reason: String },

    #[error("optimizer aborted: {0}")]
    OptimizerAborted(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed trajectory file: {0}")]
    Format(String),
}
