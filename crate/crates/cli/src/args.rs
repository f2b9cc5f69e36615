use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "bgev",
    version,
    about = "Blended GEV modelling of heavy-tailed block maxima",
    args_override_self = true
)]
pub struct Cli {
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,

    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Flat `key=value` file; each line acts as `--key=value` placed before
    /// the command-line flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Also write SVG figures.
    #[arg(long, global = true)]
    pub plots: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Maximum-likelihood fit of block maxima.
    Fit(FitArgs),
    /// Two-step spread-standardised bGEV fit with bootstrap.
    Twostep(TwostepArgs),
    /// GEV versus bGEV return-level simulation study.
    Simulate(SimulateArgs),
    /// Penalised-complexity prior curve for the tail parameter.
    Prior(PriorArgs),
    /// CRPS, twCRPS and StwCRPS of a stored two-step fit.
    Score(ScoreArgs),
    /// Return-level summaries of a stored two-step fit.
    ReturnLevels(ReturnLevelArgs),
}

impl Command {
    pub const NAMES: [&'static str; 6] = ["fit", "twostep", "simulate", "prior", "score", "return-levels"];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Fit(_) => "fit",
            Command::Twostep(_) => "twostep",
            Command::Simulate(_) => "simulate",
            Command::Prior(_) => "prior",
            Command::Score(_) => "score",
            Command::ReturnLevels(_) => "return-levels",
        }
    }
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct BlendArgs {
    /// Probability level of the location functional.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Probability mass of the spread functional.
    #[arg(long, default_value_t = 0.8)]
    pub beta: f64,
    /// Lower edge of the blending window.
    #[arg(long, default_value_t = 0.1)]
    pub pa: f64,
    /// Upper edge of the blending window.
    #[arg(long, default_value_t = 0.2)]
    pub pb: f64,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct CovariateArgs {
    /// Comma-separated covariate columns of the location predictor.
    #[arg(long, value_delimiter = ',')]
    pub mu_covariates: Vec<String>,
    /// Comma-separated covariate columns of the spread predictor.
    #[arg(long, value_delimiter = ',')]
    pub sigma_covariates: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gev,
    Bgev,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct FitArgs {
    /// Block-maxima CSV.
    #[arg(long)]
    pub maxima: PathBuf,
    #[arg(long, value_enum, default_value_t = Family::Bgev)]
    pub family: Family,
    /// Fit on the raw scale instead of rescaling responses first.
    #[arg(long)]
    pub no_standardise: bool,
    #[command(flatten)]
    pub covariates: CovariateArgs,
    #[command(flatten)]
    pub blend: BlendArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpreadSourceArg {
    Station,
    Regression,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct TwostepArgs {
    /// Block-maxima CSV.
    #[arg(long)]
    pub maxima: PathBuf,
    /// Raw observation series CSV (`station_id,t,value`).
    #[arg(long)]
    pub exceedances: PathBuf,
    #[command(flatten)]
    pub covariates: CovariateArgs,
    #[arg(long, default_value_t = 0.99)]
    pub threshold_q: f64,
    /// Declustering run length in time steps.
    #[arg(long, default_value_t = 24)]
    pub run_length: u32,
    /// Bootstrap replicates of the log-spread coefficients.
    #[arg(long, default_value_t = 100)]
    pub b_boot: usize,
    /// Time steps per year of the observation series.
    #[arg(long, default_value_t = 8760)]
    pub steps_per_year: u32,
    #[arg(long, value_enum, default_value_t = SpreadSourceArg::Station)]
    pub spread_source: SpreadSourceArg,
    /// Fit once with the point estimate of the spread regression.
    #[arg(long)]
    pub no_propagate: bool,
    #[command(flatten)]
    pub blend: BlendArgs,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 500)]
    pub replicates: usize,
    /// Sample sizes.
    #[arg(long, value_delimiter = ',', default_values_t = [25usize, 50, 100, 500, 1000])]
    pub n: Vec<usize>,
    /// Return periods.
    #[arg(long, value_delimiter = ',', default_values_t = [25.0, 50.0, 100.0, 250.0, 500.0])]
    pub periods: Vec<f64>,
    /// Scale of the bad initial value.
    #[arg(long, default_value_t = 0.9)]
    pub bad_sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorFamilyArg {
    Gev,
    Bgev,
    Gp,
    All,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct PriorArgs {
    #[arg(long, value_enum, default_value_t = PriorFamilyArg::All)]
    pub family: PriorFamilyArg,
    /// Penalty rate on the distance scale.
    #[arg(long, default_value_t = 7.0)]
    pub lambda: f64,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct ScoreArgs {
    /// Two-step fit written by `twostep`.
    #[arg(long)]
    pub fit: PathBuf,
    /// Observed maxima in the block-maxima schema.
    #[arg(long)]
    pub observations: PathBuf,
    /// Probability level of the score threshold.
    #[arg(long, default_value_t = 0.9)]
    pub p0: f64,
    /// Parameter draws per bootstrap fit in the forecast mixture.
    #[arg(long, default_value_t = 5)]
    pub draws_per_fit: usize,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct ReturnLevelArgs {
    /// Two-step fit written by `twostep`.
    #[arg(long)]
    pub fit: PathBuf,
    /// Comma-separated return periods in years.
    #[arg(long, value_delimiter = ',', required = true)]
    pub period: Vec<f64>,
    /// Parameter draws per bootstrap fit.
    #[arg(long, default_value_t = 20)]
    pub draws_per_fit: usize,
}
