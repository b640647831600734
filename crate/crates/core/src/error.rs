use thiserror::Error;

/// Error type shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or dimensions of the inputs do not line up.
    #[error("dimension mismatch: {0}")]
    Dim(String),
    /// An input value violates a documented invariant (non-finite, non-PSD, ...).
    #[error("invalid input: {0}")]
    Invalid(String),
    /// A file or byte stream could not be decoded.
    #[error("parse error: {0}")]
    Parse(String),
    /// A numerical operation broke down (singular matrix, non-finite result).
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// A caller-facing precondition was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// An iterative optimizer produced a non-finite objective.
    #[error("optimization diverged at iteration {iter}: {reason}")]
    Diverged { iter: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
