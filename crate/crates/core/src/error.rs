use thiserror::Error;

/// Errors raised by the solvers and the optimizer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A configuration value is invalid. `field` names the offending entry.
    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: String, reason: String },

    /// An argument lies outside the domain of a coefficient function.
    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    Domain { what: &'static str, value: f64, lo: f64, hi: f64 },

    /// Two arrays that must agree in shape do not.
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape { context: &'static str, expected: String, got: String },

    /// A linear solve broke down or produced non-finite values.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The nonmonotone line search exhausted its backtracking budget.
    #[error("line search failed after {backtracks} backtracks (step {step:e}, reference cost {reference:e}, last trial {trial:e})")]
    LineSearch { backtracks: usize, step: f64, reference: f64, trial: f64 },

    /// An oracle was invoked on a grid larger than its guard permits.
    #[error("oracle guard: {0}")]
    Guard(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { field: field.into(), reason: reason.into() }
    }

    pub(crate) fn shape(context: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape { context, expected: expected.to_string(), got: got.to_string() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
