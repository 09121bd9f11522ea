//! Exit-code policy: anything wrong with what the user asked for or handed
//! in (flags, file contents, config ranges) exits 1; I/O failures and
//! numeric aborts mid-run exit 2.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<skillink_core::Error> for CliError {
    fn from(error: skillink_core::Error) -> Self {
        use skillink_core::Error;
        match &error {
            Error::Io { .. }
            | Error::NonFiniteLoss { .. }
            | Error::NonFiniteScore
            | Error::InvalidTriePrefix { .. }
            | Error::IncompleteTitlePath { .. } => CliError::Runtime(error.to_string()),
            _ => CliError::Validation(error.to_string()),
        }
    }
}
