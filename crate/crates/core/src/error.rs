use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered in {context} at iteration {k}")]
    NonFinite { context: &'static str, k: usize },

    #[error("problem is incompatible with solver: {0}")]
    Incompatible(String),

    #[error("starting point is outside the domain of the regularizer")]
    InfeasibleStart,

    #[error("iterate {value} at iteration {k} left the region |x| <= {radius} where the Lipschitz constant is valid")]
    OutsideValidityRegion { k: usize, value: f64, radius: f64 },

    #[error("safeguard violated at iteration {k}: contraction factor {factor} not in [2/3, 1)")]
    Safeguard { k: usize, factor: f64 },

    #[error("negative suboptimality {value} at index {k} exceeds the clamp tolerance")]
    NegativeDelta { k: usize, value: f64 },

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("integration step too coarse: estimated error {estimate:e} exceeds {tolerance:e}; use at least {suggested_steps} steps")]
    StepTooCoarse {
        estimate: f64,
        tolerance: f64,
        suggested_steps: usize,
    },
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
