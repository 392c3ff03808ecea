//! Command-line front end: budget sweeps over the three rates, codec
//! design plus Monte-Carlo measurement, and emission of the built-in
//! source documents.

mod grid;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "ctcrd",
    about = "Rate-distortion analysis and codec simulation for composite sources",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the optimal, CTC and label-conditional rates over a budget
    /// grid and write CSV files
    RdSweep(SweepArgs),
    /// Design a CTC code at a budget and measure its rate and fidelity by
    /// Monte-Carlo simulation
    Simulate(SimulateArgs),
    /// Write one of the built-in source documents as JSON
    BuildExample(BuildExampleArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Path to a source document (JSON)
    #[arg(long, conflicts_with = "example")]
    spec: Option<PathBuf>,
    /// Name of a built-in instance: example1, example2 or example3
    #[arg(long)]
    example: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Budget grid per criterion, as id=min:max:steps (repeatable)
    #[arg(long = "budget-grid")]
    budget_grid: Vec<String>,
    /// Constraint tolerance of the solver
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Resolution of the distortion-allocation search
    #[arg(long = "alloc-res", default_value_t = 1e-3)]
    alloc_res: f64,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: available parallelism)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Design budget per criterion, as id=min:max:steps; the minima are used
    #[arg(long = "budget-grid")]
    budget_grid: Vec<String>,
    /// Symbols per trial
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    /// Number of trials
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Base seed for sampling and codebook design
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated slack values for the fidelity report
    #[arg(long, default_value = "0.01,0.05,0.1")]
    eps: String,
    /// Constraint tolerance of the solver
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Resolution of the distortion-allocation search
    #[arg(long = "alloc-res", default_value_t = 1e-3)]
    alloc_res: f64,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: available parallelism)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct BuildExampleArgs {
    /// Name of the built-in instance
    #[arg(long)]
    example: String,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::RdSweep(args) => run::rd_sweep(args),
        Command::Simulate(args) => run::simulate(args),
        Command::BuildExample(args) => run::build_example(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let report = serde_json::json!({
                "error": err.to_string(),
                "chain": err.chain().skip(1).map(|c| c.to_string()).collect::<Vec<_>>(),
            });
            eprintln!("{report}");
            ExitCode::FAILURE
        }
    }
}

pub(crate) use {BuildExampleArgs as BuildArgs, SimulateArgs as SimArgs, SweepArgs as Sweep};
