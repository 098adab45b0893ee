pub mod approx;
pub mod audit;
pub mod cluster;
pub mod lowerbound;
pub mod rate;
pub mod select;

use crate::config::ExperimentConfig;
use crate::manifest::RunManifest;
use msieve_core::CoreError;
use thiserror::Error;

/// Command-level failure with its exit-code class.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("audit failed: {0}")]
    Audit(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Audit(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numeric(_) => "numeric",
            CliError::Audit(_) => "audit",
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Config(_) | CoreError::InvalidInput(_) | CoreError::Io(_) | CoreError::Json(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("io error: {e}"))
    }
}

pub type CliResult = Result<(), CliError>;

pub fn dispatch(cfg: &ExperimentConfig, manifest: &mut RunManifest) -> CliResult {
    match cfg.command {
        crate::config::Command::Select => select::run(cfg, manifest),
        crate::config::Command::Cluster => cluster::run(cfg, manifest),
        crate::config::Command::Rate => rate::run(cfg, manifest),
        crate::config::Command::Approx => approx::run(cfg, manifest),
        crate::config::Command::Lowerbound => lowerbound::run(cfg, manifest),
        crate::config::Command::Audit => audit::run(cfg, manifest),
    }
}
