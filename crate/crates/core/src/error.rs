//! Error type shared by every solver stage.

use thiserror::Error;

/// Failure modes surfaced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EqviError {
    /// A precondition on the inputs was violated (shape, sign, range).
    #[error("contract violation: {0}")]
    Contract(String),
    /// A configuration is internally inconsistent.
    #[error("configuration error: {0}")]
    Config(String),
    /// A NaN or infinity appeared during an iteration.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// The smallness condition required by the existence certificate fails.
    #[error("certificate refused: {0}")]
    Refused(String),
    /// No admissible candidate produced a finite cost.
    #[error("infeasible configuration: {0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, EqviError>;

pub(crate) fn contract(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(EqviError::Contract(msg()))
    }
}
