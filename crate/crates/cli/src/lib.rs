//! Experiment commands behind the `tailsched` binary.
//!
//! Every command resolves a [`config::RunConfig`], writes its outputs and a
//! `run.json` manifest carrying the config digest into the output
//! directory, and returns the stdout summary with an exit code.

pub mod args;
pub mod commands;
pub mod config;
pub mod output;
pub mod plot;

pub use args::Cli;
pub use commands::run;
pub use output::CmdOutput;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Invalid configuration, arguments or input files.
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    /// A statistical check could not be carried out.
    #[error("{0}")]
    Stat(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Stat(_) => 3,
        }
    }
}
