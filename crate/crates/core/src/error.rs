use thiserror::Error;

use crate::model::Violation;
use crate::policy::PurePolicy;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("model shape error: {0}")]
    Shape(String),

    #[error("model failed validation with {} violation(s): {}", .0.len(), summarize(.0))]
    Invalid(Vec<Violation>),

    #[error("policy has {got} entries, model has {expected} states")]
    PolicyLength { expected: usize, got: usize },

    #[error("action {action} at state {state} is out of range (model has {num_actions} actions)")]
    ActionOutOfRange {
        state: usize,
        action: usize,
        num_actions: usize,
    },

    #[error("mixed policy weights at state {state} are not a probability vector")]
    InvalidWeights { state: usize },

    #[error("policy space of {actions}^{states} exceeds the limit of {limit}")]
    PolicySpaceTooLarge {
        states: usize,
        actions: usize,
        limit: u64,
    },

    #[error("linear system is singular (pivot {pivot:e}); the chain is reducible")]
    SingularSystem { pivot: f64 },

    #[error("stationary entry {value:e} at state {state} is not positive; the chain is reducible")]
    NonPositiveEntry { state: usize, value: f64 },

    #[error("stationary residual {residual:e} exceeds tolerance {tol:e}")]
    ResidualTooLarge { residual: f64, tol: f64 },

    #[error("policy {policy} induces a reducible chain")]
    ReduciblePolicy { policy: PurePolicy },

    #[error("gain/bias evaluation of policy {policy} is singular")]
    SingularEvaluation { policy: PurePolicy },

    #[error("closed-form denominator {alpha:e} is degenerate (scale {scale:e})")]
    DegenerateDenominator { alpha: f64, scale: f64 },

    #[error("closed-form result has non-positive entry {value:e} at state {state}")]
    NonPositiveResult { state: usize, value: f64 },

    #[error("selector has {got} bits, policies disagree in {expected} states")]
    SelectorLength { expected: usize, got: usize },

    #[error("{planned} combinations exceed the limit of {limit}")]
    TooManyCombinations { planned: u64, limit: u64 },

    #[error("no optimal action recorded for state {state}")]
    EmptySupport { state: usize },

    #[error("min_prob {min_prob} is infeasible for {num_states} states")]
    InfeasibleMinProb { min_prob: f64, num_states: usize },

    #[error("no unichain instance found after {tries} attempts")]
    GenerationExhausted { tries: usize },

    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
}

fn summarize(violations: &[Violation]) -> String {
    let mut parts: Vec<String> = violations.iter().take(3).map(|v| v.to_string()).collect();
    if violations.len() > 3 {
        parts.push(format!("... and {} more", violations.len() - 3));
    }
    parts.join("; ")
}
