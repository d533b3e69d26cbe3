//! `ewd` command-line tool.
//!
//! Exit codes: 0 success, 2 invalid configuration or usage, 3 data or I/O
//! problems, 4 numerical failure.

mod commands;
mod data;
mod output;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ewd::Error;

#[derive(Debug, Parser)]
#[command(name = "ewd", version, about = "Robust estimation and testing with exponentially weighted divergences")]
struct Cli {
    /// Directory for CSV artifacts (overrides EWD_OUTPUT_DIR).
    #[arg(long, global = true)]
    out_dir: Option<std::path::PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit an i.i.d. model.
    Fit(FitArgs),
    /// Fit a linear regression with normal errors.
    Regress(RegressArgs),
    /// Choose the EWD tuning parameter by minimizing the estimated MSE.
    Tune(TuneArgs),
    /// Test a normal mean with the EWD test statistic.
    Test(TestArgs),
    /// Asymptotic relative efficiency grid against the MLE.
    Are(AreArgs),
    /// Run a contamination experiment from a TOML file or a preset.
    Simulate(SimulateArgs),
    /// Emit plot data for weight functions, influence functions and MSE curves.
    Plot(PlotArgs),
}

#[derive(Debug, Args, Clone)]
pub struct DataArgs {
    /// Embedded dataset name (shoshoni, drosophila, homicide, telephone, stars, alcohol).
    #[arg(long, conflicts_with = "csv")]
    pub data: Option<String>,
    /// CSV file with a header row.
    #[arg(long)]
    pub csv: Option<std::path::PathBuf>,
    /// Column holding the sample (default: first column).
    #[arg(long)]
    pub column: Option<String>,
    /// Value column of a frequency table; requires --count-column.
    #[arg(long, requires = "count_column")]
    pub value_column: Option<String>,
    #[arg(long, requires = "value_column")]
    pub count_column: Option<String>,
    /// Response column; marks the file as a regression table.
    #[arg(long)]
    pub response: Option<String>,
    /// Comma-separated predictor columns (default: every other numeric column).
    #[arg(long, value_delimiter = ',')]
    pub predictors: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelName {
    /// N(μ, σ²), both unknown.
    Normal,
    /// N(μ, σ²) with σ known (--sigma).
    NormalMean,
    /// N(μ, σ²) with μ known (--mu).
    NormalScale,
    Exponential,
    Poisson,
}

#[derive(Debug, Args, Clone)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "normal")]
    pub model: ModelName,
    /// Known standard deviation for normal-mean.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Known mean for normal-scale.
    #[arg(long, default_value_t = 0.0)]
    pub mu: f64,
}

#[derive(Debug, Args, Clone)]
#[group(multiple = false)]
pub struct GeneratorArgs {
    /// EWD with tuning β ≥ 0.
    #[arg(long)]
    pub ewd: Option<f64>,
    /// DPD with tuning α ≥ 0.
    #[arg(long)]
    pub dpd: Option<f64>,
    /// Squared L2 distance.
    #[arg(long)]
    pub l2: bool,
    /// Maximum likelihood (the default).
    #[arg(long)]
    pub mle: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub generator: GeneratorArgs,
    /// Number of single cells in the fitted-frequency table (the last cell is the tail).
    #[arg(long, default_value_t = 5)]
    pub cells: u64,
}

#[derive(Debug, Args)]
pub struct RegressArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub generator: GeneratorArgs,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Explicit comma-separated grid of β values.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["step", "upper"])]
    pub grid: Option<Vec<f64>>,
    /// Linear grid step (with --upper).
    #[arg(long, requires = "upper")]
    pub step: Option<f64>,
    #[arg(long, requires = "step")]
    pub upper: Option<f64>,
    /// Pilot estimate (comma-separated); default is the minimum L2 fit.
    #[arg(long, value_delimiter = ',')]
    pub pilot: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Hypothesized mean.
    #[arg(long)]
    pub mu0: f64,
    /// Estimation tuning β.
    #[arg(long, default_value_t = 1e-4)]
    pub beta: f64,
    /// Tuning of the divergence in the statistic (default: β).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Monte Carlo draws for the null distribution.
    #[arg(long, default_value_t = ewd::testing::DEFAULT_MC_REPS)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the p-value curve over these β values.
    #[arg(long, value_delimiter = ',')]
    pub curve: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct AreArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Comma-separated tuning values (used for both families).
    #[arg(long, value_delimiter = ',', default_value = "0.001,0.004,0.016,0.062,0.25,1,4")]
    pub grid: Vec<f64>,
    /// Parameter at which to evaluate (default: the standard member of the family).
    #[arg(long, value_delimiter = ',')]
    pub theta: Option<Vec<f64>>,
    /// Parameter component.
    #[arg(long, default_value_t = 0)]
    pub component: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    NormalMean,
    NormalScale,
    Exponential,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML file with an [experiment] or a [table] section.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub config: Option<std::path::PathBuf>,
    /// Built-in table layout.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Replications (overrides the config or the preset default of 2000).
    #[arg(long)]
    pub reps: Option<usize>,
    /// Master seed (overrides the config).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Ewd,
    Dpd,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[command(subcommand)]
    pub kind: PlotKind,
}

#[derive(Debug, Subcommand)]
pub enum PlotKind {
    /// Weight functions w(t) on (0, --t-max].
    Weights {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 2.0)]
        t_max: f64,
        #[arg(long, default_value_t = 401)]
        points: usize,
    },
    /// Influence function of the EWD location estimate under N(0, 1).
    Influence {
        #[arg(long, value_delimiter = ',', required = true)]
        betas: Vec<f64>,
        #[arg(long, default_value_t = 6.0)]
        x_max: f64,
        #[arg(long, default_value_t = 481)]
        points: usize,
    },
    /// Simulated MSE of EWD location estimates against sample size.
    MseCurve {
        #[arg(long, value_delimiter = ',', required = true)]
        betas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "20,50,100,200,500")]
        sizes: Vec<usize>,
        /// Contamination proportion.
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        /// Mean of the N(μc, 1) contaminant.
        #[arg(long, default_value_t = 5.0)]
        contaminant_mean: f64,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Unsupported(_) | Error::Domain(_) => 2,
        Error::Data(_) | Error::Csv { .. } | Error::Io { .. } | Error::Dimension(_) => 3,
        Error::Evaluation(_)
        | Error::Integration { .. }
        | Error::Optimization(_)
        | Error::Singular { .. }
        | Error::Consistency(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = output::OutputDir::resolve(cli.out_dir.clone());
    let result = match cli.command {
        Command::Fit(a) => commands::fit(&a, &out),
        Command::Regress(a) => commands::regress(&a, &out),
        Command::Tune(a) => commands::tune(&a, &out),
        Command::Test(a) => commands::test(&a, &out),
        Command::Are(a) => commands::are(&a, &out),
        Command::Simulate(a) => commands::simulate(&a, &out),
        Command::Plot(a) => commands::plot(&a, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
