// SPDX-License-Identifier: Apache-2.0

//! Scenario registry, configuration and report emission.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 unknown scenario, 3 invalid or
//! conflicting parameters (including malformed flags and config files),
//! 4 trajectory integrator failure.

mod config;
mod registry;
mod run;

pub use config::{parse_config, parse_config_text, read_config_file, RunArgs, ScenarioSpec};
pub use registry::ScenarioId;
pub use run::{run_scenario, ScenarioReport};

use std::ffi::OsString;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::bohm::BohmError;
use crate::engines::EngineError;
use crate::statevec::StateError;
use crate::worlds::WorldsError;

/// Bumped whenever the report layout changes.
pub const FORMAT_VERSION: u32 = 1;

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (report format 1)");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("unknown scenario `{0}`; run `list` for the registry")]
    UnknownScenario(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("conflicting parameters: {0}")]
    Conflict(String),
    #[error("config file: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error("trajectory integration failed: {0}")]
    Integrator(BohmError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{0}")]
    Io(String),
}

impl From<StateError> for CliError {
    fn from(e: StateError) -> Self {
        CliError::Engine(e.into())
    }
}

impl From<WorldsError> for CliError {
    fn from(e: WorldsError) -> Self {
        CliError::Engine(e.into())
    }
}

impl From<crate::circuit::CircuitError> for CliError {
    fn from(e: crate::circuit::CircuitError) -> Self {
        CliError::Engine(e.into())
    }
}

impl CliError {
    pub(crate) fn from_bohm(e: BohmError) -> Self {
        match e {
            BohmError::NearNode { .. } => CliError::Integrator(e),
            BohmError::Io(msg) => CliError::Io(msg),
            other => CliError::InvalidParameter(other.to_string()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::UnknownScenario(_) => 2,
            CliError::InvalidParameter(_)
            | CliError::Conflict(_)
            | CliError::Config(_)
            | CliError::Usage(_)
            | CliError::Engine(_) => 3,
            CliError::Integrator(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "neutron-worlds", version = VERSION)]
#[command(
    about = "Interferometer gedanken experiments under many-worlds, collapse and pilot-wave engines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and print (or write) its report
    Run(Box<RunArgs>),
    /// Print the scenario registry
    List,
}

fn execute(args: &RunArgs) -> Result<(), CliError> {
    let spec = parse_config(args)?;
    let report = run_scenario(&spec)?;
    let text = report.to_json();
    match &spec.out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
        }
        None => {
            use std::io::Write;
            match std::io::stdout().lock().write_all(text.as_bytes()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    Err(CliError::Io(e.to_string()))
                }
                _ => Ok(()),
            }
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::List => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            for id in ScenarioId::ALL {
                if writeln!(out, "{:<20} {}", id.as_str(), id.description()).is_err() {
                    break;
                }
            }
            0
        }
        Command::Run(args) => match execute(&args) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
    }
}
