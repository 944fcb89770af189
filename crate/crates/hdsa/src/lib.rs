//! Configuration, orchestration and result files for the `hdsa` command.

pub mod bundle;
pub mod commands;
pub mod config;
pub mod exec;

pub use commands::{cmd_report, cmd_run, cmd_verify, CheckRow, RunOutcome, VerifyOutcome};
pub use config::RunConfig;
pub use exec::RayonExecutor;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::Compute(_) => 1,
        }
    }
}
