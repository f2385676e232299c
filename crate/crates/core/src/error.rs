use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension {dim} exceeds the configured maximum {max}")]
    DimensionOverflow { dim: usize, max: usize },

    #[error("state is not normalized (squared norm {norm_sq})")]
    NotNormalized { norm_sq: f64 },

    #[error("operator is not hermitian")]
    NotHermitian,

    #[error("invalid projective measurement: {0}")]
    InvalidMeasurement(String),

    #[error("invalid probability table `{field}`: {reason}")]
    InvalidDistribution { field: String, reason: String },

    #[error("invalid input `{field}`: {reason}")]
    InvalidInput { field: String, reason: String },

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("malformed document: {0}")]
    Format(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn input(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn distribution(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidDistribution {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by an internal invariant breach rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Internal(_))
    }
}
