use std::fmt;

use thiserror::Error;

use crate::equilibrium::EquilibriumReport;

/// One violated instance invariant, tagged with the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldIssue {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// All invariant violations found while validating an instance.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub issues: Vec<FieldIssue>,
}

impl ValidationReport {
    pub(crate) fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.issues.push(FieldIssue {
            field: field.into(),
            message: message.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    /// True if some issue names `field`.
    pub fn mentions(&self, field: &str) -> bool {
        self.issues.iter().any(|i| i.field == field)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (idx, issue) in self.issues.iter().enumerate() {
            if idx > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum LbtError {
    #[error("invalid instance: {0}")]
    Validation(ValidationReport),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("signal {signal} has zero probability under the given lock distribution")]
    ZeroProbabilitySignal { signal: String },

    #[error("instance too large: {what} is {got}, limit {limit}")]
    Oversized {
        what: &'static str,
        got: u128,
        limit: u128,
    },

    #[error("operation requires {0}")]
    Unsupported(String),

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("equilibrium search did not converge after {iterations} iterations (gap {gap:.3e})")]
    NonConvergence {
        iterations: usize,
        gap: f64,
        incumbent: Box<EquilibriumReport>,
    },
}

impl LbtError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        LbtError::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, LbtError>;
