use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] distsim::Error),

    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: std::io::Error },

    #[error("{0}")]
    Usage(String),

    #[error("integrity check failed: {0}")]
    Integrity(String),
}

impl CliError {
    /// 1 for usage errors, 3 for integrity failures, 2 for anything wrong with the data.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Core(distsim::Error::InvalidParameter(_)) => 1,
            CliError::Integrity(_) | CliError::Core(distsim::Error::Integrity(_)) => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
