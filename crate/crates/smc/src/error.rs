use std::path::Path;

use thiserror::Error;

/// Errors surfaced by the command line, grouped by exit code.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed model, property or data file.
    #[error("{0}")]
    Parse(String),
    /// Missing files, bad flags or inconsistent settings.
    #[error("{0}")]
    Config(String),
    /// Failures while running an experiment.
    #[error("{0}")]
    Runtime(String),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) => 1,
            Error::Config(_) => 2,
            Error::Runtime(_) => 3,
        }
    }

    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        Error::Config(format!("{}: {e}", path.display()))
    }

    pub(crate) fn write(path: &Path, e: impl std::fmt::Display) -> Self {
        Error::Runtime(format!("cannot write {}: {e}", path.display()))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! runtime_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Error {
            fn from(e: $t) -> Self {
                Error::Runtime(e.to_string())
            }
        }
    )*};
}

runtime_from!(
    smc_core::SvgpError,
    smc_core::QueryError,
    smc_core::LabelError,
    smc_core::MetricsError
);
