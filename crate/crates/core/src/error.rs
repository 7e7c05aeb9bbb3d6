use thiserror::Error;

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("panel size must be at least 1")]
    EmptyPanel,
    #[error("perfectly correlated shocks need sigma_omega > 0 when sigma_theta > 0")]
    UndefinedCorrelationScale,
    #[error("{variable} has zero sigma; its distribution is degenerate")]
    DegenerateVariable { variable: &'static str },
    #[error("trigger {trigger} lies in a degenerate tail of {variable} (cdf = {cdf})")]
    DegenerateTrigger {
        variable: &'static str,
        trigger: f64,
        cdf: f64,
    },
    #[error("input {index} must be strictly positive, got {value}")]
    NonPositiveInput { index: usize, value: f64 },
    #[error("expected {expected} inputs, got {got}")]
    InputDimension { expected: usize, got: usize },
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("baseline expected profit {0} is not positive; payout normalization is undefined")]
    NonPositiveBaselineProfit(f64),
    #[error("panel was sampled from a different shock specification")]
    PanelMismatch,
    #[error("only {count} draws fall in the {state} state (need at least {min})")]
    InsufficientStateDraws {
        state: &'static str,
        count: usize,
        min: usize,
    },
}

impl ModelError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        ModelError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
