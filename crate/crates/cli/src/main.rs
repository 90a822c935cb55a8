//! `benchtrend`: normalize, analyze and forecast CPU benchmark scores.
//!
//! Exit status is 0 on success, 1 on a usage error and 2 on a data or model error.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use benchtrend::{Method, MonthIndex, ScoreKind, Suite};
use clap::{Args, CommandFactory, Parser, Subcommand};

use crate::error::CliError;
use crate::output::Format;

#[derive(Debug, Parser)]
#[command(name = "benchtrend", version, about = "Normalize, analyze and forecast CPU benchmark scores")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Systems CSV
    #[arg(long, global = true)]
    pub systems: Option<PathBuf>,
    /// Microbenchmark CSV
    #[arg(long, global = true)]
    pub micros: Option<PathBuf>,
    /// JSON run configuration; flags override its fields
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; nothing is written outside it
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse inputs and report rejected rows
    IngestCheck,
    /// Score range and hardware means per suite
    Summarize {
        #[arg(long)]
        suite: Option<Suite>,
        #[arg(long, default_value = "speed")]
        score: ScoreKind,
    },
    /// Fit the conversion chain and put every score on the target scale
    Normalize {
        #[arg(long)]
        method: Option<Method>,
        #[arg(long)]
        target: Option<Suite>,
        #[arg(long, default_value_t = 5)]
        folds: usize,
    },
    /// Check each score against the geometric mean of its microbenchmarks
    ComposeCheck {
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Rank microbenchmarks by the variance of their log ratios
    Influence {
        #[arg(long)]
        suite: Suite,
    },
    /// Regress log normalized score on core count and auto-parallel
    FactorReg,
    /// Generation means along processor family branches
    Lineage {
        #[arg(long)]
        lineage: Option<PathBuf>,
    },
    /// Fit the power-law trend of log normalized score
    FitTrend {
        #[command(flatten)]
        window: Window,
    },
    /// Months between successive doublings of the fitted trend
    Doubling {
        /// Trend JSON from fit-trend
        #[arg(long, conflicts_with = "theta")]
        trend: Option<PathBuf>,
        /// alpha,beta,gamma
        #[arg(long, allow_hyphen_values = true, value_delimiter = ',', num_args = 1)]
        theta: Option<Vec<f64>>,
        #[arg(long, default_value = "1996-04")]
        start: MonthIndex,
        /// Months after the start to search
        #[arg(long, default_value_t = 400)]
        horizon: u32,
    },
    /// Quantile lines of cores, frequency and L3 over time
    FitQuantiles {
        #[arg(long, value_delimiter = ',')]
        taus: Option<Vec<f64>>,
        #[command(flatten)]
        window: Window,
    },
    /// Test one configuration against the feasible region, or derive a region
    FeasibleCheck {
        /// Region JSON; the bundled default when absent
        #[arg(long)]
        region: Option<PathBuf>,
        /// Build the region from the systems data
        #[arg(long)]
        derive: bool,
        #[arg(long)]
        date: Option<MonthIndex>,
        #[command(flatten)]
        machine: Machine,
    },
    /// Fit the residual Gaussian process on complete SPEC2017 records
    FitGp {
        #[arg(long)]
        trend: Option<PathBuf>,
    },
    /// Chronological holdout RMSE of trend plus GP
    GpValidate {
        #[arg(long)]
        trend: Option<PathBuf>,
        /// Fraction of the earliest records used for training
        #[arg(long, default_value_t = 0.2)]
        split: f64,
    },
    /// Predicted log score of one machine at one date
    Predict {
        #[arg(long)]
        trend: PathBuf,
        #[arg(long)]
        gp: PathBuf,
        #[arg(long)]
        date: MonthIndex,
        #[command(flatten)]
        machine: Machine,
    },
    /// Quantile scenario bounds over a range of future months
    Scenario {
        #[arg(long)]
        trend: PathBuf,
        #[arg(long)]
        gp: PathBuf,
        /// Lines JSON from fit-quantiles
        #[arg(long)]
        lines: PathBuf,
        #[arg(long)]
        region: Option<PathBuf>,
        #[arg(long)]
        from: MonthIndex,
        #[arg(long)]
        to: MonthIndex,
        /// Months between rows
        #[arg(long, default_value_t = 12)]
        step: u32,
        #[arg(long, value_delimiter = ',')]
        qs: Option<Vec<f64>>,
    },
    /// Plot-ready long table of normalized records
    SensitivityExport {
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "date,score,cores,freq_mhz,l3_kb,threads_per_core,auto_parallel"
        )]
        fields: Vec<String>,
    },
}

#[derive(Debug, Args)]
pub struct Window {
    /// First month (YYYY-MM), inclusive
    #[arg(long)]
    pub from: Option<MonthIndex>,
    /// Last month (YYYY-MM), inclusive
    #[arg(long)]
    pub to: Option<MonthIndex>,
}

#[derive(Debug, Args)]
pub struct Machine {
    #[arg(long)]
    pub cores: Option<u32>,
    #[arg(long)]
    pub freq_mhz: Option<f64>,
    #[arg(long)]
    pub l3_kb: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub threads: f64,
}

fn usage_error(message: &str) -> ExitCode {
    let usage = Cli::command().render_usage();
    eprintln!("error: {message}\n\n{usage}\n\nFor more information, try '--help'.");
    ExitCode::from(1)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => usage_error(&m),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
