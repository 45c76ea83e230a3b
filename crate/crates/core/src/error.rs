use thiserror::Error;

#[derive(Debug, Error)]
pub enum TfmError {
    #[error("index {index} out of range for {len} bidders")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("bid {index} is not a multiple of the grid step {step}")]
    OffGrid { index: usize, step: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("closed-form equilibrium is only verified for k <= 10 (got k = {k}); opt in to unverified evaluation to proceed")]
    Unverified { k: usize },

    #[error("inverse bid search did not converge for bid {bid}")]
    BisectionFailed { bid: f64 },

    #[error("search needs {needed} evaluations but the budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("exact value does not fit in 64-bit rational arithmetic")]
    Overflow,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = TfmError> = std::result::Result<T, E>;
