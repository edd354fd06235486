//! Library half of the `battdmd` binary: flag parsing, run configuration,
//! model files and the five commands.

pub mod args;
pub mod commands;
pub mod config;
pub mod modelfile;
pub mod output;

use args::{Cli, Command};

/// Exit status 2 for [`CliError::Usage`], 1 for everything else.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

macro_rules! runtime_from {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Runtime(e.into())
            }
        })*
    };
}

runtime_from!(
    battdmd::Error,
    battdmd::ModelError,
    battdmd::EvalError,
    battdmd::SynthError,
    battdmd::TimeSeriesError,
    std::io::Error,
    serde_json::Error
);

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(a) => commands::synth::run(a),
        Command::Fit(a) => commands::fit::run(a),
        Command::Simulate(a) => commands::simulate::run(a),
        Command::Sweep(a) => commands::sweep::run(a),
        Command::Transfer(a) => commands::transfer::run(a),
    }
}
