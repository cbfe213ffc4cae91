use thiserror::Error;

/// Error classes shared by every module; each maps to one CLI exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("usage: {0}")]
    Usage(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("format: {0}")]
    Format(String),
    #[error("range: {0}")]
    Range(String),
    #[error("integrity: {0}")]
    Integrity(String),
    #[error("threshold: {0}")]
    Threshold(String),
}

impl Error {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Io(_) => 2,
            Error::Format(_) | Error::Range(_) => 3,
            Error::Integrity(_) => 4,
            Error::Threshold(_) => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
