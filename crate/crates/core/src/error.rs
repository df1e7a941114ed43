use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter set violates a channel or run-configuration invariant.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The requested computation exceeds a resource guard.
    #[error("resource guard: {0}")]
    ResourceGuard(String),

    /// An orbit-reduced path was asked to handle a dithered constellation.
    #[error("{0} requires an undithered constellation")]
    Dithered(&'static str),

    #[error("invalid vector: {0}")]
    InvalidVector(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
