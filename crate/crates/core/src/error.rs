use thiserror::Error;

/// Errors raised by model construction, numerics and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),

    #[error("quadrature did not converge (error bound {bound:.3e})")]
    Quadrature { bound: f64 },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}

/// Fails with `InvalidParameter` unless `cond` holds.
pub(crate) fn ensure(cond: bool, field: &'static str, reason: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(invalid(field, reason))
    }
}
