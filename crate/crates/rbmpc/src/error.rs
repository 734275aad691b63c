//! Error types shared across the crate.

use thiserror::Error;

/// Unified error type for mesh construction, assembly, solvers, reduced-basis
/// training, bound evaluation and I/O.
#[derive(Debug, Error)]
pub enum RbMpcError {
    /// A caller-supplied argument violates a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A linear system factorization or solve failed (singular or
    /// numerically indefinite matrix).
    #[error("singular system: {0}")]
    SingularSystem(String),

    /// An iterative method exhausted its iteration budget.
    #[error("{method} did not converge after {iterations} iterations: {detail}")]
    NonConvergence {
        method: &'static str,
        iterations: usize,
        detail: String,
    },

    /// A quantity that must be (near-)nonnegative came out significantly
    /// negative, indicating a numerical-consistency problem.
    #[error("numerical consistency violation: {0}")]
    NumericalConsistency(String),

    /// Configuration parsing or validation failure.
    #[error("configuration error: {0}")]
    Config(String),

    /// Bundle (de)serialization failure.
    #[error("bundle format error: {0}")]
    BundleFormat(String),

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, RbMpcError>;

impl RbMpcError {
    /// Convenience constructor for invalid-argument errors.
    pub fn invalid(msg: impl Into<String>) -> Self {
        RbMpcError::InvalidArgument(msg.into())
    }
}
