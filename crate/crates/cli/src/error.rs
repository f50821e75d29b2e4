use std::fmt::Display;

use thiserror::Error;

/// Failure classes, each mapped to a process exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("not converged: {0}")]
    Convergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Convergence(_) => 4,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub(crate) fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub(crate) fn data_err(msg: impl Into<String>) -> CliError {
    CliError::Data(msg.into())
}

/// Tags a foreign error with a failure class and some context.
pub(crate) trait Context<T> {
    fn config(self, what: &str) -> CliResult<T>;
    fn data(self, what: &str) -> CliResult<T>;
}

impl<T, E: Display> Context<T> for Result<T, E> {
    fn config(self, what: &str) -> CliResult<T> {
        self.map_err(|e| CliError::Config(format!("{what}: {e}")))
    }

    fn data(self, what: &str) -> CliResult<T> {
        self.map_err(|e| CliError::Data(format!("{what}: {e}")))
    }
}
