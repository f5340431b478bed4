//! Error taxonomy shared by the library, the CLI and the C ABI.
//!
//! Each variant maps to a stable process exit code / C status code:
//! 0 ok, 2 I/O, 3 check failed, 4 convergence, 5 bad parameters,
//! 6 geometry, 7 gauge.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("gauge error: {0}")]
    Gauge(String),

    #[error("convergence error: {0}")]
    Convergence(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 2,
            Error::CheckFailed(_) => 3,
            Error::Convergence(_) => 4,
            Error::Parameter(_) => 5,
            Error::Geometry(_) => 6,
            Error::Gauge(_) => 7,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
