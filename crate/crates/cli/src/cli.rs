use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "ssanova", version, about = "Smoothing spline ANOVA with adaptive smoothing parameter selection")]
pub struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a data set from a benchmark scenario.
    Simulate(SimulateArgs),
    /// Select smoothing parameters and fit a model to a CSV file.
    Fit(FitArgs),
    /// Evaluate a fitted model at the rows of a CSV file.
    Predict(PredictArgs),
    /// Run the simulation benchmark against GCV.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario id: u1, u2, u3, m1, m2, m3 or m4.
    #[arg(long)]
    pub scenario: String,
    #[arg(long)]
    pub n: usize,
    /// Signal-to-noise ratio sd(η)/σ.
    #[arg(long)]
    pub snr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV with columns x1..xd and y.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional CSV with the noiseless truth η.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

/// Which `p` the ASP methods use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PChoice {
    Auto,
    Fixed(u8),
}

fn parse_p(s: &str) -> Result<PChoice, String> {
    match s {
        "auto" => Ok(PChoice::Auto),
        "1" => Ok(PChoice::Fixed(1)),
        "2" => Ok(PChoice::Fixed(2)),
        _ => Err(format!("expected auto, 1 or 2, got '{s}'")),
    }
}

/// Settings shared by `fit` and `bench`.
#[derive(Debug, Clone, Args)]
pub struct SelectionArgs {
    /// Subsample size coefficient: b = round(b_coef · n^{1/4}).
    #[arg(long, default_value_t = 50.0)]
    pub b_coef: f64,
    /// Largest subsample coefficient for asp-a.
    #[arg(long, default_value_t = 120.0)]
    pub b_max_coef: f64,
    /// Number of subsample sizes for asp-a.
    #[arg(long, default_value_t = 10)]
    pub sizes: usize,
    /// Smoothness order r of the true function.
    #[arg(long, default_value_t = 3.0)]
    pub r: f64,
    /// Penalty order p: auto, 1 or 2.
    #[arg(long, default_value = "auto", value_parser = parse_p)]
    pub p: PChoice,
    /// Subsamples aggregated by asp-u.
    #[arg(long, default_value_t = 5)]
    pub subsamples: usize,
    /// Basis count q = round(basis_coef · n^basis_exp).
    #[arg(long, default_value_t = 10.0)]
    pub basis_coef: f64,
    #[arg(long, default_value_t = 2.0 / 9.0)]
    pub basis_exp: f64,
    /// Constant C of the order-based method λ = C n^{-r/(pr+1)}.
    #[arg(long, default_value_t = 1.0)]
    pub order_c: f64,
    /// Maximum θ sweeps of full GCV.
    #[arg(long, default_value_t = 30)]
    pub gcv_max_iter: usize,
    /// Relative score improvement below which GCV stops.
    #[arg(long, default_value_t = 1e-5)]
    pub gcv_tol: f64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub response: String,
    /// Model terms, e.g. "1,2,1:2" (1-based predictor positions or names).
    #[arg(long)]
    pub model: String,
    /// gcv, skip, asp-u, asp-a or order.
    #[arg(long, default_value = "asp-u")]
    pub method: String,
    /// Predictor columns in order; defaults to every non-response column.
    #[arg(long, value_delimiter = ',')]
    pub predictors: Option<Vec<String>>,
    /// Columns forced to be discrete.
    #[arg(long, value_delimiter = ',')]
    pub discrete: Vec<String>,
    /// Columns forced to be continuous.
    #[arg(long, value_delimiter = ',')]
    pub continuous: Vec<String>,
    #[command(flatten)]
    pub selection: SelectionArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON fit document.
    #[arg(long)]
    pub out: PathBuf,
    /// Fitted-values CSV; defaults to the fit path with extension `fitted.csv`.
    #[arg(long)]
    pub fitted: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// JSON fit document written by `fit`.
    #[arg(long)]
    pub fit: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GcvCapArg {
    Auto,
    Full,
    One,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated scenario ids.
    #[arg(long, value_delimiter = ',', required = true)]
    pub scenario: Vec<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub snr: Vec<f64>,
    /// Candidate methods; GCV is always run as the benchmark.
    #[arg(long, value_delimiter = ',', default_value = "asp-u")]
    pub methods: Vec<String>,
    #[arg(long, default_value_t = 10)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// θ sweeps allowed to the GCV benchmark; auto uses one for m4.
    #[arg(long, value_enum, default_value_t = GcvCapArg::Auto)]
    pub gcv_cap: GcvCapArg,
    #[command(flatten)]
    pub selection: SelectionArgs,
    /// Per-replicate CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-cell summary CSV; defaults to the output path with extension
    /// `summary.csv`.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}
