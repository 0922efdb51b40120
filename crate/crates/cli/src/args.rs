use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mdshrink::sim::{ErrorMetric, NoiseScaling};
use mdshrink::ThresholdVariant;

#[derive(Debug, Parser)]
#[command(
    name = "mdshrink",
    version,
    about = "Shrinkage estimators of the Mahalanobis distance: experiment data generator"
)]
pub struct Cli {
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Write to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Emit a JSON document instead of CSV.
    #[arg(long, global = true)]
    pub json: bool,
    /// Run Monte-Carlo repetitions on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Asymptotic loss of the optimal shrinker as a function of the spike.
    AsymLoss(AsymLossArgs),
    /// Classical and optimal shrinkers evaluated on an eigenvalue grid.
    ShrinkerCurve(ShrinkerCurveArgs),
    /// Operator-norm losses on the spiked model.
    SpikedSim(SpikedSimArgs),
    /// Normalized Mahalanobis-distance error on the paraboloid.
    ManifoldSim(ManifoldSimArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::AsymLoss(_) => "asym-loss",
            Command::ShrinkerCurve(_) => "shrinker-curve",
            Command::SpikedSim(_) => "spiked-sim",
            Command::ManifoldSim(_) => "manifold-sim",
        }
    }
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct AsymLossArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.4,0.6,0.8,1.0")]
    pub beta: Vec<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub alpha_min: f64,
    #[arg(long, default_value_t = 3.0)]
    pub alpha_max: f64,
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct ShrinkerCurveArgs {
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    pub lambda_min: f64,
    #[arg(long, default_value_t = 10.0)]
    pub lambda_max: f64,
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
    #[arg(long, value_enum, default_value_t = ThresholdArg::BulkEdge)]
    pub threshold_variant: ThresholdArg,
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct SpikedSimArgs {
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.4,0.6,0.8,1.0")]
    pub beta: Vec<f64>,
    /// Noise levels; defaults to 0.225, 0.45, ..., 1.8.
    #[arg(long, value_delimiter = ',')]
    pub sigma: Vec<f64>,
    /// Number of spikes; the spikes are d, d-1, ..., 1.
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = NoiseArg::Sigma)]
    pub noise_scaling: NoiseArg,
    #[arg(long, value_enum, default_value_t = ThresholdArg::BulkEdge)]
    pub threshold_variant: ThresholdArg,
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct ManifoldSimArgs {
    /// Ambient dimension.
    #[arg(long, default_value_t = 100)]
    pub p: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,1.0")]
    pub beta: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1.0,1.5,2.0")]
    pub sigma: Vec<f64>,
    #[arg(long, default_value_t = 500)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = -5.0)]
    pub range_min: f64,
    #[arg(long, default_value_t = 5.0)]
    pub range_max: f64,
    #[arg(long, value_enum, default_value_t = MetricArg::Squared)]
    pub error_metric: MetricArg,
    #[arg(long, value_enum, default_value_t = NoiseArg::Sigma)]
    pub noise_scaling: NoiseArg,
    #[arg(long, value_enum, default_value_t = ThresholdArg::BulkEdge)]
    pub threshold_variant: ThresholdArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseArg {
    Sigma,
    SigmaSquared,
}

impl From<NoiseArg> for NoiseScaling {
    fn from(a: NoiseArg) -> Self {
        match a {
            NoiseArg::Sigma => NoiseScaling::Sigma,
            NoiseArg::SigmaSquared => NoiseScaling::SigmaSquared,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ThresholdArg {
    BulkEdge,
    EllPlus,
}

impl From<ThresholdArg> for ThresholdVariant {
    fn from(a: ThresholdArg) -> Self {
        match a {
            ThresholdArg::BulkEdge => ThresholdVariant::BulkEdge,
            ThresholdArg::EllPlus => ThresholdVariant::EllPlus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Squared,
    Unsquared,
}

impl From<MetricArg> for ErrorMetric {
    fn from(a: MetricArg) -> Self {
        match a {
            MetricArg::Squared => ErrorMetric::Squared,
            MetricArg::Unsquared => ErrorMetric::Unsquared,
        }
    }
}
