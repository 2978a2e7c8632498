use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use stochmort::data::Sex;
use stochmort::gibbs::CohortVarianceResidual;
use stochmort::ModelKind;

#[derive(Debug, Parser)]
#[command(name = "stochmort", version, about = "Fit, diagnose and forecast stochastic mortality models")]
pub struct Cli {
    /// Suppress progress messages on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a synthetic panel from known parameters.
    Simulate(SimulateArgs),
    /// Run the Gibbs sampler on a panel or on deaths/exposures tables.
    Fit(FitArgs),
    /// Residual heatmap data and DIC for a fitted run.
    Diagnose(DiagnoseArgs),
    /// Posterior predictive forecasts of log death rates.
    Forecast(ForecastArgs),
    /// Rank fitted runs by DIC.
    Compare(CompareArgs),
}

/// Inclusive integer range written `a:b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span(pub i32, pub i32);

fn parse_span(s: &str) -> Result<Span, String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected FIRST:LAST, got {s:?}"))?;
    let a = a.trim().parse().map_err(|_| format!("invalid bound {a:?}"))?;
    let b = b.trim().parse().map_err(|_| format!("invalid bound {b:?}"))?;
    Ok(Span(a, b))
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: stochmort::Error| e.to_string())
}

fn parse_sex(s: &str) -> Result<Sex, String> {
    s.parse().map_err(|e: stochmort::Error| e.to_string())
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GammaResidual {
    WithIntercept,
    WithoutIntercept,
}

impl From<GammaResidual> for CohortVarianceResidual {
    fn from(g: GammaResidual) -> Self {
        match g {
            GammaResidual::WithIntercept => CohortVarianceResidual::WithIntercept,
            GammaResidual::WithoutIntercept => CohortVarianceResidual::WithoutIntercept,
        }
    }
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory. Defaults to a named directory under the output root.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Root for default output directories.
    #[arg(long, env = "STOCHMORT_OUT", default_value = ".")]
    pub out_root: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// lc, simplified-cohort or full-cohort.
    #[arg(long, value_parser = parse_model)]
    pub model: ModelKind,
    /// JSON file with the true static parameters.
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long, value_parser = parse_span, default_value = "65:95")]
    pub ages: Span,
    #[arg(long, value_parser = parse_span, default_value = "1970:2010")]
    pub years: Span,
    /// Period factor at the start of the window.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub kappa0: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Seed for the stationary cohort start; defaults to `seed + 1`.
    #[arg(long)]
    pub start_seed: Option<u64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, value_parser = parse_model)]
    pub model: ModelKind,
    /// Log-rate panel CSV (`age,<year>,...`).
    #[arg(long, conflicts_with_all = ["deaths", "exposures"], required_unless_present = "deaths")]
    pub panel: Option<PathBuf>,
    /// Deaths table in the HMD 1x1 period layout.
    #[arg(long, requires = "exposures")]
    pub deaths: Option<PathBuf>,
    /// Central exposures table in the HMD 1x1 period layout.
    #[arg(long, requires = "deaths")]
    pub exposures: Option<PathBuf>,
    #[arg(long, value_parser = parse_sex, default_value = "male")]
    pub sex: Sex,
    /// Age range; defaults to 65:95 for tables and to the full panel otherwise.
    #[arg(long, value_parser = parse_span)]
    pub ages: Option<Span>,
    /// Year range; defaults to 1970:2010 for tables and to the full panel otherwise.
    #[arg(long, value_parser = parse_span)]
    pub years: Option<Span>,
    #[arg(long, default_value_t = 30_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 15_000)]
    pub burnin: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Independent chains with seeds `seed..seed+chains-1`.
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    /// JSON file overriding the default hyperpriors.
    #[arg(long)]
    pub priors: Option<PathBuf>,
    /// Residual used in the cohort innovation variance update.
    #[arg(long, value_enum, default_value = "with-intercept")]
    pub gamma_residual: GammaResidual,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Fit output directory or chain file.
    #[arg(long)]
    pub chain: PathBuf,
    /// Panel the chain was fitted to; defaults to `panel.csv` beside the chain.
    #[arg(long)]
    pub panel: Option<PathBuf>,
    /// Output directory; defaults to the chain's directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    /// Fit output directory or chain file.
    #[arg(long)]
    pub chain: PathBuf,
    #[arg(long)]
    pub horizon: usize,
    /// Forecast seed; defaults to the chain's sampler seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Do not write the per-draw forecast file.
    #[arg(long)]
    pub skip_draws: bool,
    /// Output directory; defaults to the chain's directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Fit output directories or chain files.
    #[arg(long = "chain", required = true, num_args = 1..)]
    pub chains: Vec<PathBuf>,
    /// Panel shared by all runs; defaults to each run's own `panel.csv`.
    #[arg(long)]
    pub panel: Option<PathBuf>,
    /// Also write `compare.csv` and a manifest here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
