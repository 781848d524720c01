use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user-supplied parameters (lattice size, sector, fit window, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A requested computation exceeds the exact-oracle size cap.
    #[error("size error: {0}")]
    Size(String),

    /// A numerical procedure failed (integrator blow-up, fit non-convergence).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// An internal invariant was violated; indicates a bug, not user error.
    #[error("invariant violation: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn size(msg: impl Into<String>) -> Self {
        Error::Size(msg.into())
    }
    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
    pub fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }
}
