//! CLI error kinds, each with its own process exit code:
//! 2 config, 3 data, 4 divergence, 1 anything else.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Divergence(String),
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Divergence(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Divergence(m) => write!(f, "divergence: {m}"),
            CliError::Other(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<kge::DataError> for CliError {
    fn from(e: kge::DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<kge::PmiError> for CliError {
    fn from(e: kge::PmiError) -> Self {
        match e {
            kge::PmiError::NegativeSmoothing(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<kge::ModelError> for CliError {
    fn from(e: kge::ModelError) -> Self {
        match e {
            kge::ModelError::InvalidConfig(_) => CliError::Config(e.to_string()),
            kge::ModelError::Divergence { .. } => CliError::Divergence(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<kge::EvalError> for CliError {
    fn from(e: kge::EvalError) -> Self {
        match e {
            kge::EvalError::Sampling(inner) => inner.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Other(e.to_string())
    }
}
