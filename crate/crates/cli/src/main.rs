//! `gdfm`: simulate panels, analyse spectra, plan blocks, recover shocks and
//! verify finished runs.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or input error.

mod commands;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gdfm_core::simulate::ExampleKind;

#[derive(Parser, Debug)]
#[command(name = "gdfm", version, about = "One-sided representation toolkit for dynamic factor models")]
struct Cli {
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a panel and write y/chi/xi/eps CSVs plus the resolved spec.
    Simulate(SimulateArgs),
    /// Dynamic eigenvalue curves and the divergence diagnostic.
    Analyze(AnalyzeArgs),
    /// Partition filter rows into causally invertible blocks.
    Blocks(BlocksArgs),
    /// Recover shocks and the common component.
    Recover(RecoverArgs),
    /// Re-check the invariants of a finished run directory.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Named example (eq5, eq6, eq7, unit_root).
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    pub example: Option<ExampleKind>,
    /// Model spec JSON.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Number of series (defaults to the number of filter rows).
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of time points.
    #[arg(long = "T", default_value_t = 2000)]
    pub t: usize,
    #[arg(long, default_value_t = 0.5)]
    pub idio_sigma: f64,
    #[arg(long, default_value_t = gdfm_core::simulate::DEFAULT_IDIO_AR)]
    pub idio_ar: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Panel CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Number of common shocks.
    #[arg(long)]
    pub q: usize,
    /// Nested cross-section sizes, comma separated (default n/4, n/2, n).
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Eigenvalue curves written (default q + 1).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = gdfm_core::spectral::DEFAULT_GRID)]
    pub grid: usize,
    /// Bartlett bandwidth (default floor(sqrt(T))).
    #[arg(long)]
    pub bandwidth: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BlocksArgs {
    /// Model spec JSON providing q and the filter rows.
    #[arg(long)]
    pub spec: PathBuf,
    /// Use the first n series (filters recycle cyclically).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = gdfm_core::spectral::DEFAULT_GRID)]
    pub grid: usize,
    #[arg(long, default_value_t = gdfm_core::polyalg::DEFAULT_RHO)]
    pub rho: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub delta_floor: f64,
    #[arg(long, default_value_t = 64)]
    pub l_max: usize,
    #[arg(long, default_value_t = 3)]
    pub stack_budget: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct RecoverArgs {
    /// Panel CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Block plan JSON.
    #[arg(long)]
    pub plan: PathBuf,
    /// Directory holding any of eps.csv, chi.csv, xi.csv.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub p_lags: usize,
    #[arg(long, default_value_t = 5)]
    pub n_leads: usize,
    #[arg(long, default_value_t = 64)]
    pub max_series: usize,
    #[arg(long, default_value_t = 4)]
    pub chi_lags: usize,
    #[arg(long, default_value_t = 50)]
    pub p_ar: usize,
    #[arg(long, default_value_t = 0.25)]
    pub slack: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Run directory with y.csv, plan.json, eps_hat.csv, chi_hat.csv and
    /// report.json (eps.csv and chi.csv are used when present).
    #[arg(long)]
    pub run: PathBuf,
}

/// Why a command did not succeed.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Verify { check: &'static str, detail: String },
}

impl From<gdfm_core::Error> for Failure {
    fn from(e: gdfm_core::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        gdfm_core::par::init_global(n);
    }
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Blocks(a) => commands::blocks(a),
        Command::Recover(a) => commands::recover(a, cli.threads),
        Command::Verify(a) => verify::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Verify { check, detail }) => {
            eprintln!("verify failed: {check}: {detail}");
            ExitCode::from(1)
        }
    }
}
