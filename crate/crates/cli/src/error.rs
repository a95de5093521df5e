use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config validation error: {0}")]
    Validation(String),
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] umlm::Error),
    #[error("check failed: {0}")]
    Check(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    /// Machine-readable failure category.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Model(e) if e.is_solver_failure() => "solver",
            CliError::Model(_) => "input",
            CliError::Check(_) => "check",
            CliError::Io(_) => "io",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.category() {
            "config" | "input" => 2,
            "solver" => 3,
            "check" => 4,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
