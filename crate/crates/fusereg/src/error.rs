//! Crate-wide error type and result alias.

use thiserror::Error;

/// Errors surfaced by estimation, regression, and data-handling routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid system: {}", .0.join("; "))]
    InvalidSystem(Vec<String>),

    #[error("invalid hierarchy: {0}")]
    InvalidHierarchy(String),

    #[error("hierarchy has no leaf regions")]
    EmptyHierarchy,

    #[error("hierarchy has no attached sensors")]
    NoSensors,

    #[error(
        "innovation covariance is singular (condition estimate {cond:.3e} exceeds {limit:.1e})"
    )]
    SingularInnovation { cond: f64, limit: f64 },

    #[error("measurement covariance is singular: {0}")]
    SingularR(String),

    #[error("gram matrix H^T R^-1 H is singular (condition estimate {cond:.3e})")]
    SingularGram { cond: f64 },

    #[error("KKT system is singular (condition estimate {cond:.3e})")]
    SingularKkt { cond: f64 },

    #[error("shrinkage weight alpha = {0} outside [0, 1]")]
    AlphaOutOfRange(f64),

    #[error("penalty strength lambda = {0} must be finite and nonnegative")]
    InvalidLambda(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no residual history: t = 0")]
    EmptyHistory,

    #[error("insufficient history for {kind}: need at least {needed} points, have {have}")]
    InsufficientHistory {
        kind: &'static str,
        needed: usize,
        have: usize,
    },

    #[error("training window too short: window {window} must exceed tune horizon {tune_horizon} and fit in {available} rows")]
    WindowTooShort {
        window: usize,
        tune_horizon: usize,
        available: usize,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("at step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wraps an error with the time index of the step that produced it.
    pub fn at_step(self, step: usize) -> Error {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
