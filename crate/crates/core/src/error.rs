use thiserror::Error;

/// Errors raised by theta evaluation and its building blocks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThetaError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The working precision cannot carry the requested accuracy.
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),

    /// An iteration did not reach its stopping criterion within the cap.
    #[error("no convergence after {iterations} iterations: {what}")]
    NonConvergence { what: String, iterations: u32 },

    /// A magnitude or budget precondition of the error calculus was violated.
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    /// Malformed textual input.
    #[error("parse error: {0}")]
    Parse(String),
}

impl ThetaError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        ThetaError::Domain(msg.into())
    }

    pub(crate) fn exhausted(msg: impl Into<String>) -> Self {
        ThetaError::PrecisionExhausted(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            ThetaError::Domain(_) | ThetaError::Parse(_) => 2,
            ThetaError::PrecisionExhausted(_) | ThetaError::NonConvergence { .. } => 3,
            ThetaError::PreconditionViolated(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, ThetaError>;
