use std::path::Path;

use linkforge_core::LinkError;
use linkforge_policy::PolicyError;
use linkforge_train::TrainError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    NonFinite(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::NonFinite(_) => 1,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }
}

impl From<LinkError> for CliError {
    fn from(e: LinkError) -> Self {
        match e {
            LinkError::Config(_)
            | LinkError::InvalidScenario(_)
            | LinkError::UnknownScenario(_)
            | LinkError::InvalidSnr(_)
            | LinkError::Contract(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<PolicyError> for CliError {
    fn from(e: PolicyError) -> Self {
        match e {
            PolicyError::NonFinite(_) => CliError::NonFinite(e.to_string()),
            PolicyError::Link(l) => l.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) => CliError::Config(e.to_string()),
            TrainError::NonFinite { .. } => CliError::NonFinite(e.to_string()),
            TrainError::Policy(p) => p.into(),
            TrainError::Link(l) => l.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
