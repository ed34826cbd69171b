use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;

/// Simulate and verify the martingale-difference approximation of
/// Riemann–Liouville operator fractional Brownian motion.
#[derive(Debug, Parser)]
#[command(name = "ofbm", version)]
pub struct Cli {
    /// JSON file with default values for any flag; explicit flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Emit approximation paths X_n(m/n).
    Simulate(SimulateArgs),
    /// Emit the covariance C(t,s) of the limit process over a t-grid.
    Covariance(CovarianceArgs),
    /// Run named checks and emit JSON reports.
    Verify(VerifyArgs),
    /// Check the martingale-difference conditions of one increment draw.
    MdsCheck(MdsCheckArgs),
    /// Time the direct and FFT convolutions.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Check {
    SelfSimilarity,
    Lemma6,
    Corollary,
    Covariance,
    CovarianceMc,
    Fdd,
    Tightness,
    Donsker,
    PowerBound,
}

/// Flags shared by commands that need the operator D.
#[derive(Debug, Clone, Default, Args)]
pub struct OperatorArgs {
    /// Hurst operator as JSON rows, a bare number, or @file.
    #[arg(long = "D")]
    pub hurst: Option<String>,
    /// Dimension; must match D when both are given.
    #[arg(long)]
    pub d: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GeneratorArgs {
    #[arg(long)]
    pub n: Option<usize>,
    /// rademacher or predictable-sign.
    #[arg(long)]
    pub generator: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Bound constant C of the increments.
    #[arg(long)]
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub operator: OperatorArgs,
    #[command(flatten)]
    pub generator: GeneratorArgs,
    #[arg(long)]
    pub paths: Option<usize>,
    /// naive or fft; fft by default from n = 256.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Args)]
pub struct CovarianceArgs {
    #[command(flatten)]
    pub operator: OperatorArgs,
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Checks to run; repeat or separate by commas.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub check: Vec<Check>,
    #[command(flatten)]
    pub operator: OperatorArgs,
    #[command(flatten)]
    pub generator: GeneratorArgs,
    #[arg(long)]
    pub paths: Option<usize>,
    /// Time grid for covariance, fdd and Donsker checks.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    /// Scale for the self-similarity check.
    #[arg(long)]
    pub c: Option<f64>,
    /// Time pairs as t:s, separated by commas.
    #[arg(long, value_delimiter = ',')]
    pub pairs: Option<Vec<String>>,
    /// Grid sizes for the ladder checks.
    #[arg(long, value_delimiter = ',')]
    pub ladder: Option<Vec<usize>>,
    /// Functional coefficients a_l, one per grid time.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub a: Option<Vec<f64>>,
    /// Functional vector b.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub b: Option<Vec<f64>>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Slack δ of the power bound.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MdsCheckArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[command(flatten)]
    pub generator: GeneratorArgs,
    /// Lindeberg threshold.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub operator: OperatorArgs,
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
