//! Batch runner over the blow-up laboratory: each subcommand reads one JSON
//! config, validates it before touching the output directory, runs its jobs
//! (concurrently where they are independent) and writes CSV/JSON evidence.

pub mod commands;
pub mod config;
pub mod output;
pub mod stats;

use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or unreadable config; nothing has been written.
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl From<blowup_core::Error> for CliError {
    fn from(e: blowup_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Result of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    /// Outputs were written but a simulation overflowed.
    Overflow,
}

impl Outcome {
    pub fn from_checks(passed: bool) -> Self {
        if passed {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }

    pub fn exit_code(self) -> ExitCode {
        match self {
            Outcome::Pass => ExitCode::SUCCESS,
            Outcome::Fail => ExitCode::from(1),
            Outcome::Overflow => ExitCode::from(3),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            CliError::Runtime(_) => ExitCode::from(3),
        }
    }
}

/// Options shared by all subcommands.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: std::path::PathBuf,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

impl RunOptions {
    /// Thread pool sized by `--workers` (all cores when absent).
    pub fn pool(&self) -> Result<rayon::ThreadPool, CliError> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(w) = self.workers {
            builder = builder.num_threads(w);
        }
        builder.build().map_err(|e| CliError::Runtime(e.to_string()))
    }
}
