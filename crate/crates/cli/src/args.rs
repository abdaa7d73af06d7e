use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fbreg::likelihoods::ModelKind;
use fbreg::regdata::ColumnSpec;

#[derive(Debug, Parser)]
#[command(name = "fbreg", version, about = "Fractional binomial and zero-inflated count regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the fractional binomial pmf with mean and variance.
    Pmf(PmfArgs),
    /// Fit one model by maximum likelihood.
    Fit(FitArgs),
    /// AIC leaderboard and pairwise Vuong tests over saved fits.
    Compare(CompareArgs),
    /// Vuong's closeness test between two saved fits.
    Vuong(VuongArgs),
    /// Monte-Carlo bias and standard error of the FB estimator.
    Simulate(SimulateArgs),
    /// Fitted and empirical distributions at one covariate profile.
    Profile(ProfileArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
    Csv,
}

#[derive(Debug, Args)]
pub struct PmfArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub p: f64,
    #[arg(long = "H", allow_hyphen_values = true)]
    pub h: f64,
    /// Dependence as a fraction of its upper bound, in [0, 1).
    #[arg(long = "c0", default_value_t = 0.0, allow_hyphen_values = true)]
    pub c_circ: f64,
    #[arg(long = "N")]
    pub n_trials: usize,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub response: Option<String>,
    /// `name:kind[:reference]` with kind `numeric` or `categorical`.
    #[arg(long = "covariate")]
    pub covariates: Vec<ColumnSpec>,
    /// Number of trials; defaults to the largest response.
    #[arg(long = "N")]
    pub n_trials: Option<u32>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "fb")]
    pub model: ModelKind,
    /// Restrict coefficients to [-B, B].
    #[arg(long = "box")]
    pub bound: Option<f64>,
    #[arg(long, default_value_t = 3)]
    pub starts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2000)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub gradient_tolerance: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Fit artifacts written by `fit --out`.
    #[arg(required = true)]
    pub fits: Vec<PathBuf>,
    /// Reload the data from here instead of the path recorded in the fits.
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct VuongArgs {
    pub first: PathBuf,
    pub second: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// True coefficients, `p` block then `H` block then `c0` block.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-1,1,2,1,0,-1")]
    pub theta: Vec<f64>,
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    #[arg(long = "N", default_value_t = 10)]
    pub n_trials: u32,
    #[arg(long, default_value_t = 20)]
    pub replications: usize,
    #[arg(long = "box", default_value_t = 5.0)]
    pub bound: f64,
    #[arg(long, default_value_t = 1)]
    pub starts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Include wall-clock times (makes the report differ between runs).
    #[arg(long)]
    pub timing: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[arg(required = true)]
    pub fits: Vec<PathBuf>,
    /// Raw covariate value, `name=value`; one per covariate.
    #[arg(long = "at", value_parser = parse_assignment)]
    pub at: Vec<(String, String)>,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

fn parse_assignment(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got {s:?}"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}
