use thiserror::Error;

/// Errors raised by the analysis library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a precondition (shape, range, normalization).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// The operation is not defined for the encoding in use.
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),

    /// An internal consistency check between two numerical routes failed.
    #[error("numerical inconsistency: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
