use thiserror::Error;

/// Errors raised by the library.
///
/// `Argument` covers bad inputs at a call site, `Contract` covers calls that
/// violate an operation's precondition (wrong spline order, budget exceeded,
/// underdetermined projection) and `Runtime` covers numerical failures that
/// depend on the data.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("runtime failure: {0}")]
    Runtime(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}

pub(crate) fn contract<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Contract(msg.into()))
}
