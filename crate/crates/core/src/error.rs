use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch: expected order {expected_order} over dimension {expected_dim}, got order {order} over dimension {dim}")]
    ShapeMismatch {
        expected_order: usize,
        expected_dim: usize,
        order: usize,
        dim: usize,
    },

    #[error("basis index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("dense array has {got} entries, expected {expected}")]
    DenseLength { expected: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty subspace")]
    EmptySubspace,

    #[error("time {0} outside [0, 1]")]
    TimeOutOfRange(f64),

    #[error("outside Young regime: holder exponents sum to {0} <= 1")]
    OutsideYoungRegime(f64),

    #[error("solution diverged at t = {time} (|y| = {norm:e})")]
    Divergence { time: f64, norm: f64 },

    #[error("covariance floor not asserted")]
    MissingCovarianceFloor,

    #[error("ellipticity floor violated: smallest singular value {value:e} < {floor:e} at y = {at:?}")]
    NotElliptic { value: f64, floor: f64, at: Vec<f64> },

    #[error("too few samples: got {got}, need at least {needed}")]
    TooFewSamples { got: usize, needed: usize },

    #[error("missing Malliavin derivative path for driver {0}")]
    MissingDerivative(usize),

    #[error("block layout mismatch: gradient of length {got}, layout expects {expected}")]
    LayoutMismatch { expected: usize, got: usize },

    #[error("integrand vanishes identically")]
    ZeroIntegrand,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
