use thiserror::Error;

/// Errors produced by model construction, operator application and solvers.
#[derive(Debug, Error)]
pub enum DpError {
    /// A state was constructed with an empty feasible action set.
    #[error("state {state} has an empty feasible action set")]
    EmptyFeasibleSet { state: usize },

    /// A policy prescribes an action outside the feasible set of some state.
    #[error("policy is infeasible at state {state}: action {action} is not in the feasible set")]
    InfeasiblePolicy { state: usize, action: usize },

    /// The aggregator produced a NaN at a feasible state-action pair.
    #[error("aggregator returned NaN at state {state}, action {action}")]
    NumericalDomain { state: usize, action: usize },

    /// Discount factors of one or above are only meaningful for models that
    /// carry closed forms; iterating them would diverge.
    #[error("discount factor {discount} >= 1 and the model is not flagged analytic")]
    UnstableDiscount { discount: f64 },

    /// Brute-force policy enumeration would exceed the enumeration guard.
    #[error("policy space too large to enumerate: {count} policies exceeds the guard of {guard}")]
    PolicySpaceOverflow { count: f64, guard: f64 },

    /// An invalid model parameter.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Dimension mismatch between a table and the space it should live on.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

pub type Result<T> = std::result::Result<T, DpError>;
