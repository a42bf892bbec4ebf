//! `liqnet`: synthetic data, network reconstruction, contagion simulation,
//! parameter sweeps and exact-chain checks from one binary.

mod config;
mod error;
mod manifest;
mod oracle_check;
mod reconstruct;
mod simulate;
mod sweep;
mod synth;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::{CliError, Result};

#[derive(Parser)]
#[command(name = "liqnet", version, about = "Interbank liquidity contagion on reconstructed networks")]
struct Cli {
    /// Flat `key = value` file; command-line flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (default: all cores); never changes the outputs
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    commands: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Generate synthetic banks.csv, spreads.csv and bis.csv
    Synth(synth::SynthArgs),

    /// Sample an ensemble of weighted networks for every year of the input
    Reconstruct(reconstruct::ReconstructArgs),

    /// Seed every bank of every ensemble member once and aggregate the outcome
    Simulate(simulate::SimulateArgs),

    /// Simulate over a grid of variants, β* and φ into labelled long tables
    Sweep(sweep::SweepArgs),

    /// Compare the simulator with the exact Markov chain on tiny random networks
    OracleCheck(oracle_check::OracleCheckArgs),
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Validation("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(e.to_string()))?;
    }
    let file = config::ConfigFile::load(cli.config.as_deref())?;
    match cli.commands {
        Commands::Synth(args) => synth::run(args, &file),
        Commands::Reconstruct(args) => reconstruct::run(args, &file),
        Commands::Simulate(args) => simulate::run(args, &file),
        Commands::Sweep(args) => sweep::run(args, &file),
        Commands::OracleCheck(args) => oracle_check::run(args, &file),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("liqnet: {}: {e}", e.kind());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
