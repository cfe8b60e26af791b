//! Command-line grammar. Every parameter is optional here so a JSON config
//! file can supply it; defaults are applied after merging.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "langevin-kit", version, about = "Langevin samplers and their convergence bounds")]
pub struct Cli {
    /// JSON file with parameters for the subcommand; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads for parallel sections (0 = all cores).
    #[arg(long, global = true, env = "LANGEVIN_KIT_THREADS")]
    pub threads: Option<usize>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one chain and print its summary.
    Sample(SampleArgs),
    /// Evaluate a convergence bound by name.
    Bound(BoundArgs),
    /// Step size and iteration count for a target precision.
    Plan(PlanArgs),
    /// Coupling experiment: uncoupled fraction against the theoretical bound.
    Couple(CoupleArgs),
    /// Weighted ergodic average with its variance and MSE bounds.
    Estimate(EstimateArgs),
    /// CSV of the scaled variance constant Γ_n·u⁽⁴⁾ against n.
    U4plot(U4PlotArgs),
    /// Bayesian logistic regression benchmark.
    Bench(BenchArgs),
}

/// Target distribution.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct TargetArgs {
    /// `gaussian` or `logistic`.
    #[arg(long)]
    pub potential: Option<String>,
    /// Diagonal precision of a Gaussian target, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub precision: Option<Vec<f64>>,
    /// Dimension of the standard Gaussian target.
    #[arg(long)]
    pub dim: Option<usize>,
    /// CSV file for a logistic target.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Label column of the CSV file.
    #[arg(long)]
    pub label: Option<String>,
    /// Rows of a synthetic logistic data set (used when no file is given).
    #[arg(long)]
    pub synthetic_p: Option<usize>,
    /// Covariates of a synthetic logistic data set.
    #[arg(long)]
    pub synthetic_d: Option<usize>,
    /// Seed of the synthetic data set.
    #[arg(long)]
    pub data_seed: Option<u64>,
    /// `zellner` or `isotropic`.
    #[arg(long)]
    pub prior: Option<String>,
    /// Sample in preconditioned coordinates.
    #[arg(long)]
    pub precondition: Option<bool>,
}

/// `γ_k = γ_1 k^{-α}`; constant when `alpha` is absent or zero.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleArgs {
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub target: TargetArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub schedule: ScheduleArgs,
    /// `ula` or `mala`.
    #[arg(long)]
    pub algorithm: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Burn-in N.
    #[arg(long = "burn-in")]
    #[serde(rename = "N")]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replica: Option<u64>,
    /// Starting point, comma separated; the minimizer by default.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub start: Option<Vec<f64>>,
    /// Functional recorded along the chain: `positive`, `coordinate` or `norm2`.
    #[arg(long)]
    pub functional: Option<String>,
    /// CSV file for the recorded functional.
    #[arg(long)]
    pub stream: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstantsArgs {
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long = "L", id = "lip")]
    #[serde(rename = "L")]
    pub l: Option<f64>,
    /// Hessian Lipschitz constant.
    #[arg(long)]
    pub ltilde: Option<f64>,
    #[arg(long)]
    pub d: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundArgs {
    /// Bound name, e.g. `w2_bias` or `tv_discretization`.
    #[arg(long)]
    pub theorem: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub constants: ConstantsArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub schedule: ScheduleArgs,
    /// `basic` or `smooth`.
    #[arg(long)]
    pub variant: Option<String>,
    /// First kernel index of a product range.
    #[arg(long = "from")]
    #[serde(rename = "from")]
    pub from: Option<usize>,
    /// Number of steps, or the last index of a range.
    #[arg(long)]
    pub n: Option<usize>,
    /// Total steps ℓ of the discretization bounds.
    #[arg(long)]
    pub ell: Option<usize>,
    /// Burn-in N of the estimator bounds.
    #[arg(long = "burn-in")]
    #[serde(rename = "N")]
    pub burn_in: Option<usize>,
    /// Squared distance of the start to the minimizer.
    #[arg(long)]
    pub start_dist2: Option<f64>,
    /// Distance between two starting points.
    #[arg(long)]
    pub distance: Option<f64>,
    /// Diffusion time.
    #[arg(long)]
    pub t: Option<f64>,
    /// `points`, `wasserstein` or `target`.
    #[arg(long)]
    pub branch: Option<String>,
    /// `verbatim` or `corrected` constant term of the drift bound.
    #[arg(long)]
    pub rho_reading: Option<String>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub constants: ConstantsArgs,
    /// `w2` or `tv`.
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct CoupleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub target: TargetArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub schedule: ScheduleArgs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub y: Option<Vec<f64>>,
    /// Last step reported.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Report every this many steps.
    #[arg(long)]
    pub every: Option<usize>,
    #[arg(long)]
    pub reps: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub target: TargetArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub schedule: ScheduleArgs,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long = "burn-in")]
    #[serde(rename = "N")]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub start: Option<Vec<f64>>,
    /// Bounded functional: `positive` (first coordinate above zero) or
    /// `ball` (within `radius` of the minimizer).
    #[arg(long)]
    pub functional: Option<String>,
    #[arg(long)]
    pub radius: Option<f64>,
    /// Deviations for the concentration bound, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub r: Option<Vec<f64>>,
    #[arg(long)]
    pub variant: Option<String>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct U4PlotArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub schedule: ScheduleArgs,
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long = "L", id = "lip")]
    #[serde(rename = "L")]
    pub l: Option<f64>,
    #[arg(long = "burn-in")]
    #[serde(rename = "N")]
    pub burn_in: Option<usize>,
    /// Largest n.
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub every: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub target: TargetArgs,
    /// Algorithms to compare, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub algorithms: Option<Vec<String>>,
    /// `tuned`, `paper`, `paper-decreasing` or `constant` (with `--gamma`).
    #[arg(long)]
    pub schedule: Option<String>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long = "burn-in")]
    #[serde(rename = "N")]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub replicas: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Histogram bins of the marginal-accuracy estimate.
    #[arg(long)]
    pub bins: Option<usize>,
    /// The reference MALA run has this many times `n` steps.
    #[arg(long)]
    pub reference_factor: Option<usize>,
    /// Planner target reported alongside the benchmark.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// CSV file for the per-dimension marginal accuracies.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}
