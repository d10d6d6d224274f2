mod commands;
mod config;
mod exit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::is_false;

#[derive(Debug, Parser)]
#[command(
    name = "rnff",
    version,
    about = "Regular Fourier features for harmonizable Gaussian processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compare the low-rank kernel against the closed-form kernel.
    Approximate(ApproximateArgs),
    /// Sweep m or omega_max and record the relative RSSE.
    Ablate(AblateArgs),
    /// Draw sample paths from the feature factorization.
    Simulate(SimulateArgs),
    /// Fit the spectral network to training data.
    Learn(LearnArgs),
    /// Posterior mean and variance from a trained model.
    Predict(PredictArgs),
    /// Write a synthetic training set drawn from the Silverman kernel.
    SynthData(SynthArgs),
    /// Learned model vs RBF baseline on synthetic data over several seeds.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct KernelArgs {
    /// Closed-form kernel: ls or hmk.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    /// Silverman parameter a.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// JSON spectral density ({"model", "a", "etas", "B_re", "B_im"}); replaces --kernel and --a.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectral_config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct GridArgs {
    /// Number of grid frequencies.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// Cutoff frequency.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_max: Option<f64>,
    /// symmetric or nonnegative; defaults to nonnegative for ls, symmetric for hmk.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    /// complex, real_hermitian or real_cosine.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    /// Diagonal jitter added before factorization.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter: Option<f64>,
    /// Fail instead of warning when locations exceed pi/delta_omega.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    pub strict_aliasing: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct LocationArgs {
    /// Number of locations.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Location spacing.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dx: Option<f64>,
    /// Use x_i = i*dx for i = -(n-1)/2 .. (n-1)/2 instead of i = 0 .. n-1.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    pub centered: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ApproximateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub locations: LocationArgs,
    /// Also write the matrices in the RNFF binary format.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    pub binary: bool,
    /// Output directory.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// JSON file with defaults for any of these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct AblateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArgs,
    /// Swept quantity: m or omega_max.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<String>,
    /// Comma-separated sweep values.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    /// Value of the quantity that is not swept.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed: Option<f64>,
    /// Comma-separated problem sizes.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ns: Option<Vec<usize>>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dx: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    pub centered: bool,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub locations: LocationArgs,
    /// Number of paths.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Compare the empirical covariance of the paths with the low-rank kernel.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    pub validate: bool,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_max: Option<f64>,
    /// Rank r of the spectral factorization.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    /// Comma-separated hidden layer widths.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta1: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta2: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Network outputs 2r values read as complex f.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    pub complex_output: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct LearnArgs {
    /// Training CSV with columns x, z.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub train: TrainArgs,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct PredictArgs {
    /// Trained model JSON.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    /// CSV with an x column; otherwise t points on [lo, hi].
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xs: Option<PathBuf>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    /// Also write the exact Silverman-kernel posterior; needs --data.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    pub compare_exact: bool,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    /// Silverman parameter of the exact kernel.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// Noise standard deviation of the exact posterior.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_std: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Inputs are uniform on [-x_range, x_range].
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_range: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_std: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Output CSV path.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ExperimentArgs {
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub train: TrainArgs,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Approximate(args) => commands::approximate(args),
        Command::Ablate(args) => commands::ablate(args),
        Command::Simulate(args) => commands::simulate(args),
        Command::Learn(args) => commands::learn(args),
        Command::Predict(args) => commands::predict(args),
        Command::SynthData(args) => commands::synth_data(args),
        Command::Experiment(args) => commands::experiment(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
