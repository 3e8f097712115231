use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] eoslab_core::Error),

    #[error("{context}: {source}")]
    AtStep {
        context: String,
        #[source]
        source: eoslab_core::Error,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("schema `{schema}`: {message}")]
    Schema { schema: String, message: String },

    #[error("invalid setting: {0}")]
    Invalid(String),
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Attaches a step description to core errors.
pub(crate) trait Context<T> {
    fn at(self, context: impl FnOnce() -> String) -> Result<T>;
}

impl<T> Context<T> for eoslab_core::Result<T> {
    fn at(self, context: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|source| CliError::AtStep {
            context: context(),
            source,
        })
    }
}
