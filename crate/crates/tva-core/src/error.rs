use thiserror::Error;

/// Library error type. Variants are grouped so callers can map them onto
/// process exit codes: configuration problems, invalid inputs, numerical
/// failures and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter fails a model or contract precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A quantity left the domain where a transform or formula is defined.
    #[error("domain violation: {0}")]
    Domain(String),

    /// An iterative routine could not meet its tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The requested estimator does not apply to the given conventions.
    #[error("not reducible to a linear estimator: {0}")]
    NotLinear(String),

    /// A configuration file could not be parsed.
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// Exit code category for command line front ends.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config { .. } | Error::InvalidInput(_) => 2,
            Error::Domain(_) | Error::Numerical(_) | Error::NotLinear(_) => 3,
            Error::Csv(_) | Error::Io(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
