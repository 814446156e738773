use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "cdpd",
    version,
    about = "Robust density power divergence estimation for censored regression with stochastic covariates",
    after_help = "Exit codes: 0 ok, 2 validation error, 3 numerical failure, 4 study failure.\n\
                  CDPD_THREADS caps the number of worker threads."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one model at one tuning parameter, with sandwich standard errors.
    Fit(FitArgs),
    /// Fit a full and a cleaned dataset over an alpha grid and report relative variation.
    Sweep(SweepArgs),
    /// Run the Monte Carlo study over censoring and contamination levels.
    Simulate(SimulateArgs),
    /// Influence function over expanding shells with boundedness verdicts.
    Influence(InfluenceArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON config mirroring the flags (a previous manifest.json also works).
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Directory for artifacts and the run manifest.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Print machine-readable JSON instead of the text table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    #[arg(long, value_name = "NAME")]
    pub time_col: Option<String>,
    #[arg(long, value_name = "NAME")]
    pub status_col: Option<String>,
    #[arg(long, value_name = "A,B,..", value_delimiter = ',')]
    pub covariate_cols: Option<Vec<String>>,
    /// Column holding record ids (needed for --exclude-ids).
    #[arg(long, value_name = "NAME")]
    pub id_col: Option<String>,
    /// Drop rows with missing cells instead of rejecting the file.
    #[arg(long)]
    pub drop_missing: bool,
    /// Add an intercept to the linear predictor.
    #[arg(long)]
    pub intercept: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Seed for restart perturbations (simulate: data generation seed).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Total number of optimizer starts.
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Input CSV.
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Model tag.
    #[arg(long)]
    pub model: Option<String>,
    /// Tuning parameter (default 0.3).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// `joint` or `conditional` (default joint).
    #[arg(long)]
    pub variant: Option<String>,
    /// Record ids to leave out.
    #[arg(long, value_delimiter = ',')]
    pub exclude_ids: Option<Vec<String>>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// CSV with the full data.
    pub full: Option<PathBuf>,
    /// CSV with the cleaned data (alternative to --exclude-ids).
    #[arg(long)]
    pub cleaned: Option<PathBuf>,
    /// Ids removed from the full data to form the cleaned data.
    #[arg(long, value_delimiter = ',')]
    pub exclude_ids: Option<Vec<String>>,
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub model: Option<String>,
    /// `joint` or `conditional` (default conditional).
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replications: Option<usize>,
    /// Records per replication.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub censoring_levels: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub contamination_levels: Option<Vec<f64>>,
    /// `per-record` or `independent`.
    #[arg(long)]
    pub censoring_scheme: Option<String>,
    /// `both`, `response`, `covariate` or `split`.
    #[arg(long)]
    pub channel: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct InfluenceArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub model: Option<String>,
    /// Covariate dimension.
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub intercept: bool,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub theta: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub gamma: Option<Vec<f64>>,
    /// Take the model, design and parameters from a `fit` JSON.
    #[arg(long, value_name = "FILE")]
    pub fit: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub y_max: Option<f64>,
    #[arg(long)]
    pub x_radius_max: Option<f64>,
    #[arg(long)]
    pub points_per_shell: Option<usize>,
}
