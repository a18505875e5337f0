use thiserror::Error;

/// A failed command and the exit code it maps to.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0:#}")]
    Data(#[from] anyhow::Error),
    #[error("evaluation refused: {0}")]
    Refused(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => crate::EXIT_USAGE,
            CliError::Data(_) => crate::EXIT_DATA,
            CliError::Refused(_) => crate::EXIT_REFUSED,
        }
    }
}

impl From<catdet_core::ingest::IngestError> for CliError {
    fn from(e: catdet_core::ingest::IngestError) -> Self {
        CliError::Data(e.into())
    }
}
