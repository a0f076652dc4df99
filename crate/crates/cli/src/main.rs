//! `sbtm`: simulate, fit and evaluate stochastic block transition models.
//!
//! Exit codes: 0 on success, 1 on a runtime or data error, 2 on a usage
//! error.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "sbtm", version, about = "Stochastic block transition models for dynamic networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a network from the model and write it with its true allocation.
    Simulate(SimulateArgs),
    /// Fit by greedy exact-ICL maximisation.
    Fit(FitArgs),
    /// Compare an estimated allocation with a reference one.
    Evaluate(EvaluateArgs),
    /// Print the exact log-ICL of an allocation. Only differences between
    /// allocations of the same cube are meaningful.
    Icl(IclArgs),
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["k", "params"]))]
pub struct SimulateArgs {
    /// Number of nodes.
    #[arg(long)]
    pub n: usize,
    /// Number of frames.
    #[arg(long)]
    pub t: usize,
    /// Number of groups; parameters are drawn from the priors.
    #[arg(long)]
    pub k: Option<usize>,
    /// Use Jeffreys priors (all hyperparameters 0.5) for the drawn parameters.
    #[arg(long, requires = "k", conflicts_with = "hyper")]
    pub jeffreys: bool,
    /// Scalar hyperparameter overrides (key = value) for the drawn parameters.
    #[arg(long, requires = "k")]
    pub hyper: Option<PathBuf>,
    /// Fixed parameter file instead of drawing from the priors.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Diagonal of the transition matrix used when the parameter file has
    /// no `pi` section.
    #[arg(long, default_value_t = 0.8, requires = "params")]
    pub stay: f64,
    /// Remove the inactive state: every node is active in every frame.
    #[arg(long)]
    pub no_inactive: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (created if missing).
    #[arg(long, short, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Init {
    Random,
    Kmeans,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["cube", "edges"]))]
pub struct FitArgs {
    /// Cube file (`N T` header, then `t i j` lines).
    #[arg(long)]
    pub cube: Option<PathBuf>,
    /// Activity file for `--cube`; by default a node is active iff it has an edge.
    #[arg(long, requires = "cube")]
    pub activity: Option<PathBuf>,
    /// Timestamped edge list (`time a b` lines).
    #[arg(long, requires = "frame_width")]
    pub edges: Option<PathBuf>,
    /// Frame width for `--edges`, in the units of the timestamps.
    #[arg(long)]
    pub frame_width: Option<f64>,
    /// Upper bound on the number of groups.
    #[arg(long, default_value_t = 10)]
    pub kup: usize,
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Init::Kmeans)]
    pub init: Init,
    /// Worker threads for restarts; defaults to all cores.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    pub max_sweeps: usize,
    /// Run sweeps again after each round of merges.
    #[arg(long)]
    pub resweep_after_merge: bool,
    /// Scalar hyperparameter overrides (key = value).
    #[arg(long)]
    pub hyper: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, short, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Estimated allocation CSV.
    #[arg(long)]
    pub z_hat: PathBuf,
    /// Reference allocation CSV.
    #[arg(long)]
    pub z_true: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, short, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IclArgs {
    #[arg(long)]
    pub cube: PathBuf,
    #[arg(long)]
    pub activity: Option<PathBuf>,
    /// Allocation CSV.
    #[arg(long)]
    pub z: PathBuf,
    /// Scalar hyperparameter overrides (key = value).
    #[arg(long)]
    pub hyper: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let outcome = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Icl(a) => commands::icl(&a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
