use thiserror::Error;

/// Errors raised by the radio map library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid window: lower bound {a} must be below upper bound {b}")]
    InvalidWindow { a: i64, b: i64 },

    #[error("window slope must be positive, got {0}")]
    InvalidBeta(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("singular covariance: {0}")]
    SingularCovariance(String),

    #[error("invalid segmentation: {0}")]
    InvalidSegmentation(String),

    #[error("window mass {0:e} is too small to estimate a segment")]
    DegenerateWindow(f64),

    #[error("subspace dimension {dim} is not below the sensor count {sensors}")]
    InvalidDimension { dim: usize, sensors: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("no eligible route through the region graph")]
    NoFeasibleRoute,

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("edge-probability calibration failed: {0}")]
    Calibration(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownName { kind: &'static str, name: String, available: String },
}

pub type Result<T> = std::result::Result<T, Error>;
