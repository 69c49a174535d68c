//! `extremal` command-line front end.
//!
//! Exit codes: 0 success, 1 checked-property violation, 2 usage or
//! configuration error, 3 resource budget exceeded.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use extremal::config::RunConfig;

#[derive(Parser, Debug)]
#[command(
    name = "extremal",
    version,
    about = "Extreme value laws, hitting times and escape rates for interval maps"
)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: $EXTREMAL_OUT_DIR or the current directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Maximum number of worker threads.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extreme value law sweep over n.
    Evl(StochasticArgs),
    /// Hitting-time survival curves over a τ grid for each ε.
    Hts(StochasticArgs),
    /// Escape-rate fits, spectral oracle and bound window for each ε.
    Escape(StochasticArgs),
    /// Extremal index θ_n over an ε grid, exact.
    Ei(CommonArgs),
    /// Error-bracket breakdowns with optimised blocking parameters.
    Bounds(BoundsArgs),
    /// Exact short-range recurrence sums and ball/annulus domination.
    Check(CheckArgs),
    /// Partition functions and finite-n pressure.
    Pressure(PressureArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// Builtin map: doubling, tripling, or widths like "1/2,1/4,1/4".
    #[arg(long)]
    pub map: Option<String>,
    /// Centre of the observable, fractions allowed.
    #[arg(long)]
    pub zeta: Option<String>,
    /// circle or line.
    #[arg(long)]
    pub topology: Option<String>,
    /// Comma list of sample sizes, scientific notation allowed.
    #[arg(long)]
    pub n: Option<String>,
    /// Comma list of ball radii.
    #[arg(long)]
    pub eps: Option<String>,
    /// τ value or comma list.
    #[arg(long)]
    pub tau: Option<String>,
    /// Annulus depth; defaults to the period of ζ.
    #[arg(long)]
    pub q: Option<usize>,
    /// Decay constant C0 of γ(t) = C0 λ^t.
    #[arg(long)]
    pub c0: Option<f64>,
    /// Decay rate λ of γ(t) = C0 λ^t.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Use γ ≡ 0.
    #[arg(long)]
    pub no_decay: bool,
}

#[derive(Args, Debug, Clone)]
pub struct StochasticArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of Monte-Carlo trials.
    #[arg(long)]
    pub trials: Option<String>,
    /// Master seed (required).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Minimum Ulam bins for the escape oracle.
    #[arg(long)]
    pub bins: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug, Clone)]
pub struct CheckArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Horizons for the exact domination check (each must exceed q).
    #[arg(long, default_value = "4,6,8,10,12")]
    pub small_n: String,
    /// Break the domination inequality on purpose.
    #[cfg(feature = "fault-injection")]
    #[arg(long)]
    pub inject_fault: bool,
}

#[derive(Args, Debug, Clone)]
pub struct PressureArgs {
    #[arg(long)]
    pub map: Option<String>,
    /// geometric, constant:<value> or tabulated:<v1,v2,...>.
    #[arg(long)]
    pub potential: Option<String>,
    #[arg(long)]
    pub n_max: Option<usize>,
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Violation(String),
    Budget(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Violation(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Budget(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Violation(m) => write!(f, "property violated: {m}"),
            CliError::Budget(m) => write!(f, "budget exceeded: {m}"),
        }
    }
}

impl From<extremal::Error> for CliError {
    fn from(e: extremal::Error) -> Self {
        match e {
            extremal::Error::BudgetExceeded { .. } | extremal::Error::CapExceeded { .. } => {
                CliError::Budget(e.to_string())
            }
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            Ok(RunConfig::from_toml(&text)?)
        }
        None => Ok(RunConfig::default()),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let base = load_config(&cli.config)?;
    let out = output::out_dir(&cli.out, &base);
    let task = || match &cli.command {
        Command::Evl(a) => commands::evl(base.clone(), a, &out),
        Command::Hts(a) => commands::hts(base.clone(), a, &out),
        Command::Escape(a) => commands::escape(base.clone(), a, &out),
        Command::Ei(a) => commands::ei(base.clone(), a, &out),
        Command::Bounds(a) => commands::bounds(base.clone(), a, &out),
        Command::Check(a) => commands::check(base.clone(), a, &out),
        Command::Pressure(a) => commands::pressure(base.clone(), a, &out),
    };
    match cli.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .install(task),
        None => task(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
