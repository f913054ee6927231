use alloc::string::String;

/// Errors produced by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("infeasible point: {0}")]
    Infeasible(String),
    #[error("entry {index} is zero but must be strictly positive")]
    ZeroEntry { index: usize },
    #[error("inner solver stopped after {iterations} iterations with residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite {what} at iteration {iteration}")]
    Diverged { what: &'static str, iteration: usize },
    #[error("non-finite activation at node {node}")]
    NonFiniteNode { node: usize },
    #[error("search space has {size} architectures, more than the limit of {limit}")]
    SpaceTooLarge { size: u128, limit: u128 },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn infeasible(msg: impl Into<String>) -> Error {
    Error::Infeasible(msg.into())
}
