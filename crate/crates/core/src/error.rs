use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument is out of contract.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// All samples identical; the GEV likelihood has no maximizer.
    #[error("degenerate data: all {n} samples equal {value}")]
    DegenerateData { n: usize, value: f64 },

    /// Too few samples for a stable fit.
    #[error("insufficient data: {got} samples, need at least {need}")]
    InsufficientData { got: usize, need: usize },

    /// A sample lies outside the support of the given parameters.
    #[error("support violation: sample {value} outside support at index {index}")]
    SupportViolation { value: f64, index: usize },

    /// Covariate dimension does not match the model or dataset.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Training produced non-finite loss; the last stable flat weight
    /// vector is carried so callers can restore it.
    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize, last_stable: Vec<f64> },

    /// Backpropagation disagreed with finite differences at initialization.
    #[error("gradient check failed: weight {index}, analytic {analytic:.6e}, numeric {numeric:.6e}")]
    GradientCheck {
        index: usize,
        analytic: f64,
        numeric: f64,
    },

    /// Numerical overflow/domain failure in a generator, with the offending covariate.
    #[error("domain error at x = {at}: {what}")]
    Domain { what: String, at: f64 },

    /// CSV / document parse failure with location.
    #[error("parse error at row {row}, column {col}: {what}")]
    Parse { row: usize, col: String, what: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
