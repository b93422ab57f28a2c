//! Experiment runner for `subgraph-stein`: reads a JSON configuration, runs
//! one of the sweeps and writes JSON/CSV reports into an output directory.

use std::path::PathBuf;

use thiserror::Error;

pub mod commands;
pub mod config;
pub mod report;

pub use commands::{run, Command, RunOptions, RunOutcome, Status};
pub use config::{ExperimentConfig, LoadedConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },

    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] subgraph_stein::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Core(subgraph_stein::Error::BudgetExceeded { .. })
            | CliError::Core(subgraph_stein::Error::OracleTooLarge { .. }) => 3,
            _ => 1,
        }
    }
}
