use thiserror::Error;

/// Errors produced by dictionary construction, detection and analysis.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Matrix or vector dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A restricted dictionary is rank deficient.
    #[error("singular support: {0}")]
    SingularSupport(String),

    /// Covariance estimation failed (degenerate or insufficient data).
    #[error("estimation failed: {0}")]
    Estimation(String),

    /// A numeric routine failed to converge or produced a degenerate value.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
