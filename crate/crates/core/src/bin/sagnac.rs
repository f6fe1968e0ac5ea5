use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sagnac_core::runner::{run, Command, RunOptions};
use sagnac_core::scenario::load_scenario;

/// Sagnac loop simulator and analysis toolkit.
#[derive(Parser)]
#[command(name = "sagnac", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Photon-counting visibility run (phi = 0 and phi = pi).
    Simulate(Common),
    /// Classical phase-noise variance versus length with a power-law fit.
    AnalyzePhase(Common),
    /// Synthetic photon-counting OTDR trace and fit.
    FitOtdr(Common),
    /// Burst schedule design and SNR curves.
    OptimizeBurst(Common),
    /// Intensity-noise power spectral density.
    Psd(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario JSON document.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// First seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Number of consecutive seeds.
    #[arg(long, default_value_t = 1)]
    seeds: usize,
    /// Skip the raw timestamp files.
    #[arg(long)]
    no_timestamps: bool,
    /// Print a summary to stderr.
    #[arg(short, long)]
    verbose: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::AnalyzePhase(a) => (Command::AnalyzePhase, a),
        Cmd::FitOtdr(a) => (Command::FitOtdr, a),
        Cmd::OptimizeBurst(a) => (Command::OptimizeBurst, a),
        Cmd::Psd(a) => (Command::Psd, a),
    };
    let options = RunOptions {
        seed: args.seed,
        seeds: args.seeds,
        timestamps: !args.no_timestamps,
    };
    let outcome = load_scenario(&args.scenario).and_then(|s| run(&s, command, &args.out, &options));
    match outcome {
        Ok(report) => {
            if args.verbose {
                eprintln!(
                    "{}: scenario {} -> {} ({} files)",
                    command.name(),
                    report.provenance.scenario_sha256,
                    args.out.display(),
                    report.files.len()
                );
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
