use thiserror::Error;

/// Errors raised across scenario loading, solving and simulation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("graph consistency error: {0}")]
    Consistency(String),

    #[error("oracle size cap exceeded: {0}")]
    OracleSize(String),

    #[error("slot {slot}: constraint violated: {reason}")]
    Constraint { slot: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            line,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
