use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter constraint violated: {0}")]
    ConstraintViolated(String),
    #[error("non-finite input: {0}")]
    NonFiniteInput(String),
    #[error("covariance factorization failed (matrix not positive definite)")]
    FactorizationFailed,
    #[error("level mismatch: expected {expected}, found {found}")]
    LevelMismatch { expected: u32, found: u32 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("truncation mismatch: {0} vs {1}")]
    TruncationMismatch(usize, usize),
    #[error("state left the declared box or became non-finite at step {step}")]
    NonFiniteState { step: usize },
    #[error("line search found no descent direction after {iterations} iterations")]
    NoDescent { iterations: usize },
    #[error("optimizer hit the iteration cap ({0})")]
    MaxIterations(usize),
    #[error("Hessian spectrum violates the A > -Id requirement: min eigenvalue {0}")]
    SpectrumViolatesA4(f64),
    #[error("check failed: {0}")]
    CheckFailed(String),
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 2 for invalid input, 1 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ConstraintViolated(_)
            | Error::NonFiniteInput(_)
            | Error::LevelMismatch { .. }
            | Error::DimensionMismatch(_)
            | Error::IndexOutOfRange(_)
            | Error::TruncationMismatch(..)
            | Error::InvalidSpec(_)
            | Error::Json(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
