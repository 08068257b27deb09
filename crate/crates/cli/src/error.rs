use std::fmt::Display;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("estimation failed: {0}")]
    Estimation(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Estimation(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

pub fn config(e: impl Display) -> CliError {
    CliError::Config(e.to_string())
}

pub fn data(e: impl Display) -> CliError {
    CliError::Data(e.to_string())
}

pub fn io(e: impl Display) -> CliError {
    CliError::Io(e.to_string())
}
