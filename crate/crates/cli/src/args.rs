use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

/// Uncertainty quantification pipelines for imperfect computer models.
#[derive(Debug, Parser)]
#[command(name = "uq", version, args_override_self = true)]
pub struct Cli {
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker thread cap.
    #[arg(long, global = true, env = "UQ_THREADS")]
    pub threads: Option<usize>,

    /// Every file the pipeline writes goes below this directory.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,

    /// JSON run configuration (seed, sample sizes, per-command blocks).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Validate arguments, config and input files without computing.
    #[arg(long, global = true)]
    pub dry_run: bool,

    /// Report file name inside the output directory [default: <command>.json].
    #[arg(long, global = true)]
    pub report: Option<String>,

    #[command(subcommand)]
    pub command: Command,
}

/// Global flags that take a value, so their values are not mistaken for
/// the subcommand name.
pub const VALUE_GLOBALS: [&str; 5] = ["--seed", "--threads", "--out-dir", "--config", "--report"];

#[derive(Debug, Subcommand, Serialize)]
#[serde(untagged)]
pub enum Command {
    /// Draw inputs from an estimated normal law or a Latin hypercube.
    GenInputs(GenInputs),
    /// Fit a penalised least-squares surrogate, optionally improved by experiments.
    FitSurrogate(FitSurrogate),
    /// Kernel density estimate of surrogate outputs.
    Density(Density),
    /// Plug-in Monte-Carlo quantile of surrogate outputs.
    Quantile(Quantile),
    /// Area validation metric between experimental and simulated outputs.
    Avm(Avm),
    /// MAP fit of the Gaussian-process discrepancy and its error quantile.
    GpError(GpError),
    /// Bootstrap estimate of the residual-model error quantile.
    BootstrapError(BootstrapError),
    /// Confidence interval for a quantile of the true response.
    CiQuantile(CiQuantile),
    /// Confidence band for the density of the true response.
    DensityBand(DensityBand),
    /// Write data from a synthetic system with known truth.
    Synth(Synth),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenInputs(_) => "gen-inputs",
            Command::FitSurrogate(_) => "fit-surrogate",
            Command::Density(_) => "density",
            Command::Quantile(_) => "quantile",
            Command::Avm(_) => "avm",
            Command::GpError(_) => "gp-error",
            Command::BootstrapError(_) => "bootstrap-error",
            Command::CiQuantile(_) => "ci-quantile",
            Command::DensityBand(_) => "density-band",
            Command::Synth(_) => "synth",
        }
    }
}

/// A saved surrogate (output of fit-surrogate).
#[derive(Debug, Args, Serialize)]
pub struct ModelArg {
    #[arg(long)]
    pub model: Option<PathBuf>,
}

/// Experimental data: input columns plus one output column.
#[derive(Debug, Args, Serialize)]
pub struct ExpArg {
    #[arg(long)]
    pub exp: Option<PathBuf>,
    /// Output column of --exp [default: last column].
    #[arg(long)]
    pub exp_output: Option<String>,
}

/// Input sample on which the surrogate is evaluated.
#[derive(Debug, Args, Serialize)]
pub struct InputsArg {
    #[arg(long)]
    pub inputs: Option<PathBuf>,
    /// Columns of --inputs to use, in model order [default: all].
    #[arg(long, value_delimiter = ',')]
    pub columns: Vec<String>,
}

/// Output grid `lo:hi:steps`; derived from the data when absent.
#[derive(Debug, Args, Serialize)]
pub struct GridArg {
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, default_value_t = 512)]
    pub grid_steps: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct GenInputs {
    /// Estimate a normal law from the columns of this file.
    #[arg(long, conflicts_with = "ranges")]
    pub from: Option<PathBuf>,
    /// Latin hypercube over `lo:hi` ranges, one per input.
    #[arg(long, value_delimiter = ',')]
    pub ranges: Vec<String>,
    /// Number of draws [default: n2 from the config].
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long, default_value = "inputs.csv")]
    pub out: String,
}

#[derive(Debug, Args, Serialize)]
pub struct FitSurrogate {
    /// Computer-model runs: input columns plus one output column.
    #[arg(long)]
    pub sim: Option<PathBuf>,
    /// Output column of --sim [default: last column].
    #[arg(long)]
    pub sim_output: Option<String>,
    /// spline1d, poly or rbf.
    #[arg(long, default_value = "spline1d")]
    pub family: String,
    /// Knots, degree or centres [default: 12, 3 or 50].
    #[arg(long)]
    pub size: Option<usize>,
    /// Penalty weight, or `gcv` to choose it by generalised cross-validation.
    #[arg(long, default_value = "gcv")]
    pub penalty: String,
    /// Fit a residual model on these experiments to get an improved surrogate.
    #[command(flatten)]
    pub exp: ExpArg,
    #[arg(long, default_value = "spline1d")]
    pub residual_family: String,
    /// [default: 5, 1 or 20 for spline1d, poly or rbf].
    #[arg(long)]
    pub residual_size: Option<usize>,
    /// Weighted residual fit using --extra inputs.
    #[arg(long)]
    pub weighted: bool,
    #[arg(long)]
    pub extra: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value = "model.json")]
    pub out: String,
}

#[derive(Debug, Args, Serialize)]
pub struct Density {
    #[command(flatten)]
    pub model: ModelArg,
    #[command(flatten)]
    pub inputs: InputsArg,
    /// naive, gauss or epanechnikov.
    #[arg(long, default_value = "naive")]
    pub kernel: String,
    /// Bandwidth, or `auto`.
    #[arg(long, default_value = "auto")]
    pub bandwidth: String,
    #[command(flatten)]
    pub grid: GridArg,
    #[arg(long, default_value = "density.csv")]
    pub out: String,
}

#[derive(Debug, Args, Serialize)]
pub struct Quantile {
    #[command(flatten)]
    pub model: ModelArg,
    #[command(flatten)]
    pub inputs: InputsArg,
    #[arg(long, default_value_t = 0.95)]
    pub alpha: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct Avm {
    #[command(flatten)]
    pub exp: ExpArg,
    #[arg(long)]
    pub sim: Option<PathBuf>,
    #[arg(long)]
    pub sim_output: Option<String>,
    /// Cells of the Riemann sum.
    #[arg(long, default_value_t = 10_000)]
    pub steps: usize,
    /// Optional CSV of both empirical CDFs on the Riemann grid.
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct GpError {
    #[command(flatten)]
    pub exp: ExpArg,
    /// Column of --exp holding m(Xᵢ); otherwise --model is evaluated.
    #[arg(long)]
    pub model_column: Option<String>,
    #[command(flatten)]
    pub model: ModelArg,
    #[arg(long, default_value_t = 0.95)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    /// closed-form, empirical or free.
    #[arg(long, default_value = "closed-form")]
    pub beta_mode: String,
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
    #[arg(long, default_value_t = 3000)]
    pub max_evals: usize,
    /// Also maximise over the prior hyperparameters.
    #[arg(long)]
    pub joint_hyper: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct BootstrapError {
    #[command(flatten)]
    pub exp: ExpArg,
    #[command(flatten)]
    pub model: ModelArg,
    #[arg(long, default_value_t = 500)]
    pub reps: usize,
    #[arg(long, default_value_t = 10)]
    pub n_learn: usize,
    #[arg(long, default_value_t = 0.95)]
    pub alpha: f64,
    #[arg(long, default_value = "poly")]
    pub residual_family: String,
    #[arg(long)]
    pub residual_size: Option<usize>,
    #[arg(long, default_value_t = 1e-6)]
    pub residual_penalty: f64,
    /// Weight of the experimental term; below 1 needs --extra.
    #[arg(long, default_value_t = 1.0)]
    pub weight: f64,
    #[arg(long)]
    pub extra: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CiQuantile {
    #[command(flatten)]
    pub exp: ExpArg,
    #[command(flatten)]
    pub model: ModelArg,
    #[command(flatten)]
    pub inputs: InputsArg,
    #[arg(long, default_value_t = 0.95)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// `half`, `sweep` or a fixed value below --delta.
    #[arg(long, default_value = "half")]
    pub delta_delta: String,
    /// Use the improved surrogate of the model file rather than its base.
    #[arg(long)]
    pub improved: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct DensityBand {
    #[command(flatten)]
    pub exp: ExpArg,
    #[command(flatten)]
    pub model: ModelArg,
    #[command(flatten)]
    pub inputs: InputsArg,
    /// Minimal interval length κ.
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Bandwidths to combine [default: one chosen from the data].
    #[arg(long, value_delimiter = ',')]
    pub bandwidths: Vec<f64>,
    #[arg(long, default_value = "naive")]
    pub kernel: String,
    #[command(flatten)]
    pub grid: GridArg,
    #[arg(long)]
    pub improved: bool,
    #[arg(long, default_value = "band.csv")]
    pub out: String,
}

#[derive(Debug, Args, Serialize)]
pub struct Synth {
    /// mafds or hidim.
    #[arg(long, default_value = "mafds")]
    pub system: String,
    /// none, constant, linear or smooth.
    #[arg(long, default_value = "none")]
    pub bias: String,
    #[arg(long, default_value_t = 0.0)]
    pub sigma_obs: f64,
    /// Experiments.
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Computer-model runs [default: l_n from the config].
    #[arg(long)]
    pub sims: Option<usize>,
    /// Extra inputs for the weighted residual fit [default: n1]; 0 skips the file.
    #[arg(long)]
    pub extra_count: Option<usize>,
    /// Inputs for density and quantile estimation [default: n2]; 0 skips the file.
    #[arg(long)]
    pub inputs_count: Option<usize>,
    /// Also report the true α-quantile and bias quantile.
    #[arg(long)]
    pub alpha: Option<f64>,
}
