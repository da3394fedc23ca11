use std::path::PathBuf;

/// Failures mapped onto process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("cannot access {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) | CliError::Io { .. } => 3,
            CliError::Domain(_) => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

impl From<freqband::Error> for CliError {
    fn from(e: freqband::Error) -> Self {
        match e {
            freqband::Error::Data(m) => CliError::Data(m),
            freqband::Error::Domain(m) | freqband::Error::Contract(m) => CliError::Domain(m),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
