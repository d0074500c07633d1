use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Debug, Parser)]
#[command(name = "omkalman", version, about = "Optomechanical state-space modeling and Kalman filtering")]
struct Cli {
    /// Parameter file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Random seed for simulation.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Suppress summaries on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Assemble the model and write `model.json` and `build_summary.txt`.
    Build,
    /// Simulate a measurement record into `trajectory.bin` and `trajectory.csv`.
    Simulate(SimulateArgs),
    /// Filter a recorded trajectory into `filter.bin`, `filter.csv` and `filter_summary.txt`.
    Filter(FilterArgs),
    /// Innovation consistency report; exits 1 when a threshold fails.
    Check(CheckArgs),
    /// Output noise spectrum of the model on a linear frequency grid.
    Spectrum(SpectrumArgs),
    /// Filter throughput and numeric resolution.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 100_000)]
    steps: usize,
    /// ChaCha20 stream, for independent records under one seed.
    #[arg(long, default_value_t = 0)]
    stream: u64,
    /// Start from x = 0 instead of a stationary draw.
    #[arg(long)]
    zero_init: bool,
    /// Rows in the CSV preview.
    #[arg(long, default_value_t = 1000)]
    preview: usize,
}

#[derive(Debug, Args)]
struct FilterArgs {
    /// Trajectory file; defaults to `<out>/trajectory.bin`.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Also store the full covariance at every step.
    #[arg(long)]
    store_covariances: bool,
    #[arg(long, default_value_t = 1000)]
    preview: usize,
}

#[derive(Debug, Args)]
struct CheckArgs {
    /// Filter run; defaults to `<out>/filter.bin`.
    #[arg(long)]
    run: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    segments: usize,
    #[arg(long, default_value_t = 0.95)]
    confidence: f64,
    #[arg(long, default_value_t = 3.0)]
    mean_sigmas: f64,
    #[arg(long, default_value_t = 0.94)]
    fraction_min: f64,
    #[arg(long, default_value_t = 0.96)]
    fraction_max: f64,
    #[arg(long, default_value_t = 0.90)]
    welch_min: f64,
    /// Longest allowed run of out-of-band Welch bins; 0 disables the check.
    #[arg(long, default_value_t = 8)]
    max_flagged_run: usize,
}

#[derive(Debug, Args)]
struct SpectrumArgs {
    #[arg(long, default_value_t = 0.0)]
    f_min_hz: f64,
    #[arg(long, default_value_t = 5e6)]
    f_max_hz: f64,
    #[arg(long, default_value_t = 1001)]
    points: usize,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 500_000)]
    steps: usize,
    #[arg(long, default_value_t = 5)]
    trials: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::CliError::Threshold) => ExitCode::from(1),
        Err(commands::CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
