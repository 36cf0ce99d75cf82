//! `ctbn`: simulate, estimate and analyse two-component CTBNs from the command line.

mod commands;
mod heatmap;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "ctbn", version, about = "Composable CTBN simulation, estimation and causality analysis")]
pub struct Cli {
    /// Directory for outputs and the run manifest.
    #[arg(long, global = true, env = "CTBN_OUT_DIR", default_value = "ctbn-out")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample composite trajectories from a model file.
    Simulate(SimulateArgs),
    /// Sufficient statistics and MLE generators from trajectory files.
    Estimate(EstimateArgs),
    /// Causality report from a model or from observed trajectories.
    Causality(CausalityArgs),
    /// Replicated plug-in causality for the binary Markov-modulated model.
    ModulatedStudy(StudyArgs),
    /// Causality of upticks and downticks in a quote file, per cap.
    Tick(TickArgs),
    /// Write a synthetic Skellam quote file.
    Skellam(SkellamArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Model JSON with nx, ny, x_given_y and y_given_x.
    #[arg(long)]
    pub model: PathBuf,
    /// Composite initial law: comma-separated probabilities or "stationary".
    #[arg(long, default_value = "stationary")]
    pub p0: String,
    #[arg(long)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1000)]
    pub replications: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Composite trajectory files.
    #[arg(long, num_args = 1.., required = true)]
    pub trajectories: Vec<PathBuf>,
    #[arg(long)]
    pub nx: usize,
    #[arg(long)]
    pub ny: usize,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["model", "trajectories"])))]
pub struct CausalityArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, num_args = 1..)]
    pub trajectories: Vec<PathBuf>,
    #[arg(long, default_value = "stationary")]
    pub p0: String,
    /// Required with --model.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Required with --trajectories.
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub ny: Option<usize>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    /// Rate of X from 1 to 2 while Y = 1.
    #[arg(long, default_value_t = 1.0)]
    pub lambda1: f64,
    /// Rate of X from 1 to 2 while Y = 2.
    #[arg(long, default_value_t = 3.0)]
    pub lambda2: f64,
    /// Rate of X from 2 to 1 while Y = 1.
    #[arg(long, default_value_t = 2.0)]
    pub mu1: f64,
    /// Rate of X from 2 to 1 while Y = 2.
    #[arg(long, default_value_t = 4.0)]
    pub mu2: f64,
    /// Rate of Y from 1 to 2, whatever the state of X.
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    /// Rate of Y from 2 to 1, whatever the state of X.
    #[arg(long, default_value_t = 0.7)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0e4)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1000)]
    pub replications: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Histogram bins per direction.
    #[arg(long, default_value_t = 40)]
    pub bins: usize,
}

#[derive(Debug, Args)]
pub struct TickArgs {
    /// CSV with header timestamp_ms,price.
    #[arg(long)]
    pub quotes: PathBuf,
    #[arg(long)]
    pub tick_size: f64,
    /// Maximum modelled jump size in ticks; repeat for a sweep.
    #[arg(long = "cap", default_values_t = [1usize, 5, 10, 20])]
    pub caps: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct SkellamArgs {
    #[arg(long, default_value_t = 1.0)]
    pub rate_up: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rate_down: f64,
    #[arg(long, default_value_t = 1.0e4)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0.0001)]
    pub tick_size: f64,
    /// Geometric jump-size decay; 0 gives unit jumps.
    #[arg(long, default_value_t = 0.0)]
    pub size_decay: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

/// Arguments as given, minus any `--out` so a replay can redirect output.
fn recorded_arguments(raw: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(raw.len());
    let mut skip = false;
    for a in raw {
        if skip {
            skip = false;
        } else if a == "--out" {
            skip = true;
        } else if !a.starts_with("--out=") {
            out.push(a.clone());
        }
    }
    out
}

fn exit_code(err: &ctbn_core::Error) -> u8 {
    if err.is_internal() {
        4
    } else if err.is_data_error() {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let raw: Vec<String> = std::env::args().skip(1).collect();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::run(cli, recorded_arguments(&raw)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
