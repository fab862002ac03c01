use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    /// A function evaluated to +inf where a finite value was required.
    #[error("domain violation: {function} is infinite ({constraint})")]
    DomainViolation {
        function: String,
        constraint: String,
    },

    #[error("unsupported function: {0}")]
    UnsupportedFunction(String),

    #[error("certificate failed: achieved gap {achieved} exceeds requested {requested}")]
    CertificateFailed { achieved: f64, requested: f64 },

    #[error("inexact prox failed after {iterations} inner iterations (best gap {best_gap:e}, target {target:e})")]
    InexactSolveFailed {
        iterations: usize,
        best_gap: f64,
        target: f64,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

pub(crate) fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            got,
        })
    }
}
