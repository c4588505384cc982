use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("plot error: {0}")]
    Plot(String),

    #[error(transparent)]
    Core(#[from] graphon_osc::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(graphon_osc::Error::Divergence { .. }) => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

pub fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}
