//! Error type shared by all modules.

use std::fmt;

/// Errors produced by the analysis library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument violated a precondition (range, emptiness, ...).
    InvalidArgument(String),
    /// A mechanism description failed validation; names the offending field.
    InvalidMechanism { field: String, reason: String },
    /// An exact oracle would exceed its evaluation budget.
    BudgetExceeded { required: u64, budget: u64 },
    /// Too few samples to reach the requested order-statistic confidence.
    InsufficientSamples { have: usize, confidence: f64 },
    /// Requested parameters cannot be met (accuracy below the noise floor,
    /// state size rounding to zero, ...).
    Infeasible(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Self::InvalidMechanism { field, reason } => {
                write!(f, "invalid mechanism: field `{field}`: {reason}")
            }
            Self::BudgetExceeded { required, budget } => write!(
                f,
                "instance too large: {required} evaluations exceed the budget of {budget}"
            ),
            Self::InsufficientSamples { have, confidence } => write!(
                f,
                "insufficient samples: {have} samples cannot reach confidence {confidence}"
            ),
            Self::Infeasible(msg) => write!(f, "infeasible parameters: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
