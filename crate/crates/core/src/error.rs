use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("matrix is not anti-Hermitian (defect {defect:.3e})")]
    NotAntiHermitian { defect: f64 },
    #[error("matrix is not unitary (defect {defect:.3e})")]
    NotUnitary { defect: f64 },
    #[error("non-finite matrix entry")]
    NonFinite,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Errors raised while validating experiment or family parameters.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("configuration error: {0}")]
pub struct ConfigError(pub String);

impl ConfigError {
    pub fn new(msg: impl Into<String>) -> Self {
        ConfigError(msg.into())
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NumericalError {
    #[error("unitarity drift {drift:.3e} at step {step} exceeds {limit:.1e}")]
    UnitarityDrift { step: usize, drift: f64, limit: f64 },
    #[error("non-finite value at step {step}")]
    NonFinite { step: usize },
}

/// Top-level error for library operations.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Numerical(#[from] NumericalError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// A per-path failure inside an ensemble, tagged for replay.
    #[error("path {path_index} (seed {path_seed:#018x}) failed: {source}")]
    PathFailure {
        path_index: u64,
        path_seed: u64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
