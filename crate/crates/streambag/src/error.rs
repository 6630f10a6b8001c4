use thiserror::Error;

/// Unified error type for the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A value or argument lies outside its declared domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// An instance, prediction, or file does not conform to the schema in play.
    #[error("schema error: {0}")]
    Schema(String),
    /// A data file could not be parsed. `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn schema(msg: impl Into<String>) -> Self {
        Error::Schema(msg.into())
    }

    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
