use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("(I - rho W) is singular for rho = {rho}")]
    SingularSystem { rho: f64 },

    #[error("both regime densities underflow at t = {t}")]
    DensityUnderflow { t: usize },

    #[error("zero predicted probability with positive smoothed mass at t = {t}")]
    ImpossibleTransition { t: usize },

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularSystem { .. }
                | Error::DensityUnderflow { .. }
                | Error::ImpossibleTransition { .. }
                | Error::DegenerateInput(_)
                | Error::Optimization(_)
        )
    }
}
