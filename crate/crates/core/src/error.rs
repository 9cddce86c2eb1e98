use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("dataset needs at least {min} rows, got {got}")]
    TooFewRows { min: usize, got: usize },

    #[error("contamination fraction {0} must lie in [0, 1/3)")]
    Epsilon(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}

pub type Result<T> = core::result::Result<T, Error>;

/// Shared `ε < 1/3` guard.
pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if !(eps.is_finite() && (0.0..1.0 / 3.0).contains(&eps)) {
        return Err(Error::Epsilon(eps));
    }
    Ok(())
}
