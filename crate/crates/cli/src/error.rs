use thiserror::Error;

use crate::config::KeyIssue;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },

    #[error("config: {0}")]
    Syntax(String),

    #[error("config is missing required keys: {}", .0.join(", "))]
    Missing(Vec<String>),

    #[error("config: {}", join(.0))]
    Invalid(Vec<KeyIssue>),

    #[error("{flag}: {message}")]
    Flag { flag: &'static str, message: String },
}

fn join(issues: &[KeyIssue]) -> String {
    issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Numerical(#[from] hemadyn::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },

    #[error("{} check(s) failed: {}", .0.len(), .0.join(", "))]
    ChecksFailed(Vec<String>),
}

impl CliError {
    /// 2 config error, 3 numerical failure, 4 failed checks, 1 anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(hemadyn::Error::InvalidParams(_)) => 2,
            CliError::Numerical(_) => 3,
            CliError::ChecksFailed(_) => 4,
            CliError::Io { .. } | CliError::Csv { .. } => 1,
        }
    }
}
