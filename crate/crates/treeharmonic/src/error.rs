//! Crate-wide error type.

/// Errors shared by all modules. Numerical routines that can fail to converge
/// carry their best incumbent so callers can still inspect partial results.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("arity mismatch: operator expects {expected} values, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("unsupported operator: {0}")]
    Unsupported(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("did not converge: {context} (best value {best}, residual gap {gap})")]
    Convergence { context: String, best: f64, gap: f64 },

    #[error("optimization failed: {context} (best incumbent {best})")]
    Optimization { context: String, best: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
    pub fn capacity(msg: impl Into<String>) -> Self {
        Error::Capacity(msg.into())
    }
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
