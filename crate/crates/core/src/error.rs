use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A tree references something the data cannot provide, or is malformed.
    #[error("structural error: {0}")]
    Structure(String),

    /// Invalid configuration or parameter combination.
    #[error("configuration error: {0}")]
    Config(String),

    /// Problems with input data (CSV, partitions, feature widths).
    #[error("data error: {0}")]
    Data(String),

    /// A fitter produced or started from non-finite values.
    #[error("numeric failure: {0}")]
    NumericFailure(String),

    /// A tree document could not be parsed.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::NumericFailure(msg.into())
    }
}
