pub mod euclid_run;
pub mod ode_verify;
pub mod scaling;
pub mod testfn_check;
pub mod torus_run;

use std::path::Path;

use crate::{CliError, Outcome, RunOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    OdeVerify,
    TorusRun,
    EuclidRun,
    ScalingStudy,
    TestfnCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::OdeVerify => "ode-verify",
            Command::TorusRun => "torus-run",
            Command::EuclidRun => "euclid-run",
            Command::ScalingStudy => "scaling-study",
            Command::TestfnCheck => "testfn-check",
        }
    }
}

/// Loads the config for `command` and runs it.
pub fn execute(command: Command, config: Option<&Path>, opts: &RunOptions) -> Result<Outcome, CliError> {
    use crate::config::load;
    match command {
        Command::OdeVerify => ode_verify::run(&load(config, Some(ode_verify::DEFAULT_CONFIG))?, opts),
        Command::TorusRun => torus_run::run(&load(config, None)?, opts),
        Command::EuclidRun => euclid_run::run(&load(config, None)?, opts),
        Command::ScalingStudy => scaling::run(&load(config, None)?, opts),
        Command::TestfnCheck => testfn_check::run(&load(config, Some(testfn_check::DEFAULT_CONFIG))?, opts),
    }
}
