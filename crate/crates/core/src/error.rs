use alloc::string::String;
use core::fmt;

/// Errors raised by the core operations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// A precondition on an argument was violated.
    InvalidArgument(String),
    /// Depth-scale alignment has no overlap to work with (empty valid set).
    /// Carries the offending view index when raised from the fusion loop.
    AlignmentImpossible { view: Option<usize> },
    /// The splat optimizer produced a non-finite loss.
    NonFiniteLoss { iteration: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::AlignmentImpossible { view: Some(i) } => {
                write!(f, "alignment impossible for view {i}: no overlap between mask and valid depth")
            }
            Error::AlignmentImpossible { view: None } => {
                write!(f, "alignment impossible: no overlap between mask and valid depth")
            }
            Error::NonFiniteLoss { iteration } => {
                write!(f, "non-finite loss at optimizer iteration {iteration}")
            }
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
