use thiserror::Error;

/// Failures mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, malformed input files, invalid configurations.
    #[error("{0}")]
    Input(String),
    /// Files that cannot be read or written.
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

impl From<tensordens::Error> for CliError {
    fn from(e: tensordens::Error) -> Self {
        CliError::Input(e.to_string())
    }
}
