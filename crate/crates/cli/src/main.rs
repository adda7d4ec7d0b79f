//! `backstep`: kernel solves, gain-accuracy budgets, closed-loop stability
//! verification, and parameter sweeps over scenario configs.
//!
//! Exit codes: 0 pass, 1 a stability check failed, 2 config error,
//! 3 numeric failure.

mod config;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::CliError;
use run::CommandIo;

#[derive(Parser)]
#[command(name = "backstep", version, about = "Boundary-feedback stabilization workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario config (strict JSON).
    #[arg(long)]
    config: PathBuf,
    /// Directory for result files, created if missing.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Replaces the scenario's perturbation seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the scenario's kernel equations; write kernel and gain CSVs.
    SolveKernel(CommonArgs),
    /// Evaluate the gain-accuracy budget and print it with its constants.
    EpsilonStar(CommonArgs),
    /// Run the solve-perturb-simulate pipeline and judge the guarantee.
    Verify(CommonArgs),
    /// Run the scenario once per axis value and aggregate the verdicts.
    Sweep(CommonArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, body): (&CommonArgs, fn(&CommandIo) -> Result<bool, CliError>) =
        match &cli.command {
            Command::SolveKernel(a) => (a, run::cmd_solve_kernel),
            Command::EpsilonStar(a) => (a, run::cmd_epsilon_star),
            Command::Verify(a) => (a, run::cmd_verify),
            Command::Sweep(a) => (a, run::cmd_sweep),
        };
    let io = CommandIo {
        config_path: &args.config,
        out_dir: &args.out_dir,
        seed: args.seed,
    };
    match body(&io) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Numeric(m)) => {
            eprintln!("numeric failure: {m}");
            ExitCode::from(3)
        }
    }
}
