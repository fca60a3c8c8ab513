use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Block shapes or algebra membership do not line up.
    #[error("structural mismatch: {0}")]
    Structural(String),
    /// An argument violates the operation's precondition.
    #[error("domain error: {0}")]
    Domain(String),
    /// An iterative procedure failed to converge or bracket.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// A result failed its own post-construction verification.
    #[error("consistency failure: {0}")]
    Consistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;
