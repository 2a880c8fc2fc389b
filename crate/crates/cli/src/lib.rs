//! Command-line front end: configuration resolution, figure presets, oracle
//! validation, and CSV output.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::Parser;
use thiserror::Error;

pub use commands::run_command;
pub use config::{resolve_config, Command, Overrides, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("numerical failure: {0}")]
    Numerical(pdcshape_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Io(_) => 4,
            CliError::Numerical(_) => 5,
        }
    }
}

impl From<pdcshape_core::Error> for CliError {
    fn from(e: pdcshape_core::Error) -> Self {
        match e.root() {
            pdcshape_core::Error::Parameter(msg) => CliError::Usage(msg.clone()),
            _ => CliError::Numerical(e),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "pdcshape",
    version,
    about = "Coincidence rates of phase-shaped type-I down-converted photon pairs",
    allow_negative_numbers = true
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,

    #[command(flatten)]
    pub overrides: Overrides,

    /// `key = value` configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Output CSV path (stdout when omitted; fig3 derives two file names)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Resolves configuration and runs the command.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let text = match &cli.config {
        Some(path) => Some(
            std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        ),
        None => None,
    };
    let config = resolve_config(cli.command, &cli.overrides, text.as_deref(), cli.out)?;
    run_command(&config)
}
