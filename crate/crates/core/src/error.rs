use thiserror::Error;

/// Errors raised by the spectral and resonance computations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalrError {
    /// An input violates a documented precondition (bad Lamé pair, radii out
    /// of order, evaluation point on a boundary, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The basis element or block is not covered by the closed forms.
    #[error("unsupported basis element or block: {0}")]
    Unsupported(String),

    /// A linear system is too close to singular to solve reliably.
    #[error("near-singular system (condition number {condition:.3e}): {context}")]
    NearSingular { condition: f64, context: String },

    /// An iterative linear-algebra routine did not converge.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// A numerical cross-check exceeded its tolerance.
    #[error("tolerance exceeded in {check}: error {error:.3e} > {tolerance:.3e}")]
    ToleranceExceeded {
        check: String,
        error: f64,
        tolerance: f64,
    },
}

impl CalrError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        CalrError::InvalidInput(msg.into())
    }

    /// True for errors caused by bad user input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(self, CalrError::InvalidInput(_) | CalrError::Unsupported(_))
    }
}

pub type Result<T> = std::result::Result<T, CalrError>;
