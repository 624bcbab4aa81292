//! Command-line front end: `bounds`, `bootstrap` and `simulate`.

pub mod commands;
pub mod io;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use io::SchemaError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Core(#[from] pate_bounds::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 for bad input, 2 when the computation itself failed.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if !e.is_validation() => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pate-bounds", version, about = "Bounds on the population average treatment effect")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Point bounds for an experiment and its population
    Bounds(AnalysisArgs),
    /// Percentile bootstrap intervals for the bound endpoints
    Bootstrap(BootstrapArgs),
    /// Run a simulation cell or grid from a JSON config
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RangePolicyArg {
    Observed,
    Declared,
}

#[derive(Debug, Clone, Args)]
pub struct AnalysisArgs {
    /// CSV with header id,z,w,y,x1,...,xp
    pub input: PathBuf,

    /// Declared outcome range, e.g. `--y-range=-2,3`
    #[arg(long, value_name = "LO,HI", allow_hyphen_values = true)]
    pub y_range: String,

    /// Propensity-score strata for the stratified bounds
    #[arg(long, value_name = "K")]
    pub strata: Option<usize>,

    /// 1-based covariate columns for the propensity model (default: all)
    #[arg(long, value_name = "I,J,...", value_delimiter = ',')]
    pub covariates: Option<Vec<usize>>,

    /// Add squared terms to the propensity model
    #[arg(long)]
    pub squares: bool,

    /// Outcome range used inside each stratum
    #[arg(long, value_enum, default_value = "observed")]
    pub stratum_ranges: RangePolicyArg,

    /// Extra population of inference: `sd:S` or `pscore-range` (repeatable)
    #[arg(long, value_name = "SPEC")]
    pub redefine: Vec<String>,

    /// Write the table here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BootstrapArgs {
    #[command(flatten)]
    pub analysis: AnalysisArgs,

    #[arg(long, default_value_t = 1000)]
    pub reps: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Frameworks to bootstrap (default: all available)
    #[arg(long, value_name = "NAME")]
    pub framework: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// JSON config; list-valued parameters define a grid
    pub config: PathBuf,

    /// Override the config seed
    #[arg(long)]
    pub seed: Option<u64>,

    /// Override the config replicate count
    #[arg(long)]
    pub reps: Option<usize>,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Bounds(a) => commands::bounds(&a)?.emit(a.out.as_ref()),
        Command::Bootstrap(a) => commands::bootstrap(&a)?.emit(a.analysis.out.as_ref()),
        Command::Simulate(a) => commands::simulate(&a)?.emit(a.out.as_ref()),
    }
}
