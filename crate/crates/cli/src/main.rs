use std::path::PathBuf;
use std::process::ExitCode;

use blowup_cli::commands::{execute, Command};
use blowup_cli::RunOptions;
use clap::{Args, Parser, Subcommand};

/// Blow-up laboratory runner. Exit codes: 0 pass, 1 verification failure,
/// 2 config error, 3 runtime or overflow error.
#[derive(Parser)]
#[command(name = "blowup", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Seeded property suite for the coupled ODE
    OdeVerify(Common),
    /// Pseudospectral run on the torus
    TorusRun(Common),
    /// Finite-difference run on a truncated Euclidean box
    EuclidRun(Common),
    /// Lifespan against data amplitude
    ScalingStudy(Common),
    /// Checks of the radial weight function
    TestfnCheck(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config (optional for ode-verify and testfn-check)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for independent jobs (default: all cores)
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Sub::OdeVerify(a) => (Command::OdeVerify, a),
        Sub::TorusRun(a) => (Command::TorusRun, a),
        Sub::EuclidRun(a) => (Command::EuclidRun, a),
        Sub::ScalingStudy(a) => (Command::ScalingStudy, a),
        Sub::TestfnCheck(a) => (Command::TestfnCheck, a),
    };
    if args.workers == Some(0) {
        eprintln!("config error: --workers must be positive");
        return ExitCode::from(2);
    }
    let opts = RunOptions { out: args.out, seed: args.seed, workers: args.workers };
    match execute(command, args.config.as_deref(), &opts) {
        Ok(outcome) => {
            eprintln!("{}: {:?}", command.name(), outcome);
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("{}: {e}", command.name());
            e.exit_code()
        }
    }
}
