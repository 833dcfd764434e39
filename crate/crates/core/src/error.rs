use thiserror::Error;

/// Errors raised by the simulation, filtering and backward solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("policy needs feature `{0}` which the caller did not supply")]
    MissingFeature(&'static str),

    #[error("non-finite observation increment at step {step}")]
    Data { step: usize },

    #[error("degenerate particle cloud: total mass underflowed at t = {t}")]
    DegenerateCloud { t: f64 },

    #[error("ill-conditioned regression basis at step {step} (condition number {condition:.3e})")]
    IllConditioned { step: usize, condition: f64 },

    #[error("time grid mismatch: {0}")]
    GridMismatch(String),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateCloud { .. } | Error::IllConditioned { .. } | Error::Data { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
