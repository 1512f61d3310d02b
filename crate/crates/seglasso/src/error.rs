use thiserror::Error;

/// Errors produced by the segmentation and estimation routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its admissible range (infeasible K, bad gamma, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Structurally inconsistent inputs (length mismatch, invalid breakpoints, ...).
    #[error("structural mismatch: {0}")]
    Mismatch(String),

    /// A NaN or infinity reached a routine that requires finite input.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// A solver failed to meet its contract.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
