use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use log::error;
use tradeoff_cli::{parse_scenario, run_command, CliError, Command, RunOptions, EXIT_IO};

/// Risk/utility trade-off analysis of one-period markets.
#[derive(Debug, Parser)]
#[command(name = "portcli", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Scenario JSON file. Optional for `counterexample`.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Number of grid points when the scenario gives a range or none.
    #[arg(long)]
    grid_points: Option<usize>,
    /// Solver tolerance on the binding constraint.
    #[arg(long)]
    tol_solver: Option<f64>,
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("PORTCLI_THREADS") else { return Ok(()) };
    let n: usize = raw.trim().parse().with_context(|| format!("PORTCLI_THREADS={raw:?} is not a count"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(args: &Args) -> Result<(), CliError> {
    let scenario = match &args.scenario {
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|source| CliError::Io { path: path.clone(), source })?;
            Some(parse_scenario(&bytes)?)
        }
        None => None,
    };
    std::fs::create_dir_all(&args.out).map_err(|source| CliError::Io { path: args.out.clone(), source })?;
    let opts = RunOptions { grid_points: args.grid_points, tol_solver: args.tol_solver };
    run_command(args.command, scenario.as_ref(), &args.out, &opts)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    if let Err(e) = configure_threads() {
        error!("{e:#}");
        return ExitCode::from(EXIT_IO as u8);
    }
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("portcli {}: {e}", args.command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
