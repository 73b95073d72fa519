//! Error classification shared by the library and the command-line tool.

use thiserror::Error;

/// Failure classes reported by the library.
///
/// `Usage` covers malformed requests (inconsistent options, bad flag
/// combinations), `Data` covers invalid or mutually inconsistent inputs, and
/// `Numerical` covers breakdowns of the fitting computations themselves. The
/// command-line tool maps these to distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl Error {
    /// Exit code used by the command-line tool for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Data(_) | Error::Io { .. } => 2,
            Error::Numerical(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
