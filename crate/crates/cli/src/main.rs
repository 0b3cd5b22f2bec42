use std::path::PathBuf;
use std::process::ExitCode;

use afbm_cli::{load_config, run, CliError, Experiment, ExperimentConfig};
use clap::Parser;

/// Regenerates AFBM experiment data as CSV files.
#[derive(Debug, Parser)]
#[command(name = "afbm", version, about)]
struct Args {
    experiment: Experiment,
    /// TOML or JSON config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: `output` from the config, else `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
}

fn main_inner(args: Args) -> Result<(), CliError> {
    let mut cfg = match &args.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    let out = args.out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let resolved = cfg.resolve(Some(args.experiment))?;
    let result = run(&resolved, &out)?;
    println!("{} [config {} seed {}]", result.summary, &resolved.hash[..12], resolved.config.seed);
    Ok(())
}

fn main() -> ExitCode {
    match main_inner(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
