//! Error type shared across the crate.

use std::fmt;

/// Errors reported by model construction, state updates, and training.
#[derive(Debug, Clone, PartialEq)]
pub enum DybmError {
    /// A vector or matrix had the wrong length for the model dimensions.
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    /// A hyperparameter was outside its valid range.
    InvalidParameter(String),
    /// An input value was outside the model's domain, e.g. a non-binary
    /// pattern fed to a binary model.
    Domain(String),
    /// A computation produced a non-finite value. `step` is the 1-based
    /// online step at which divergence was detected, when known.
    NonFinite { what: String, step: Option<u64> },
    /// A window or index fell outside the recorded range.
    OutOfRange(String),
}

impl fmt::Display for DybmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DybmError::DimensionMismatch {
                what,
                expected,
                actual,
            } => write!(f, "{what}: expected length {expected}, got {actual}"),
            DybmError::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            DybmError::Domain(msg) => write!(f, "domain error: {msg}"),
            DybmError::NonFinite { what, step } => match step {
                Some(step) => write!(f, "non-finite {what} at step {step}"),
                None => write!(f, "non-finite {what}"),
            },
            DybmError::OutOfRange(msg) => write!(f, "out of range: {msg}"),
        }
    }
}

impl std::error::Error for DybmError {}

pub type Result<T> = std::result::Result<T, DybmError>;
