//! `mmquote`: simulate, compare, sweep, rank portfolio risk and verify.
//!
//! Exit codes: 0 success, 1 failed verification, 2 configuration error, 3 I/O error.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug)]
pub enum CliError {
    Verification(String),
    Config(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Verification(_) => 1,
            Self::Config(_) => 2,
            Self::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Verification(msg) => write!(f, "verification failed: {msg}"),
            Self::Config(msg) => write!(f, "configuration error: {msg}"),
            Self::Io(msg) => write!(f, "I/O error: {msg}"),
        }
    }
}

impl From<mmquote::Error> for CliError {
    fn from(err: mmquote::Error) -> Self {
        match err {
            mmquote::Error::Domain(_) => Self::Config(err.to_string()),
            mmquote::Error::Io { .. } | mmquote::Error::Csv { .. } => Self::Io(err.to_string()),
            mmquote::Error::Inconclusive(_) | mmquote::Error::Numeric(_) => Self::Verification(err.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mmquote", version, about = "Optimal market-making quotes: simulation and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for the CSV outputs.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of paths, overriding the configuration.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SweepParam {
    Epsilon,
    Alpha,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a batch of trading days and summarise the PNL.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Simulate the portfolio in the "multi" block.
        #[arg(long)]
        multi: bool,
    },
    /// Compare quoting arms on common random numbers.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Arms as `model[:policy]`, e.g. `martingale,ou:zero-order`.
        #[arg(long, value_delimiter = ',', default_value = "martingale,ou")]
        arms: Vec<String>,
    },
    /// Sweep epsilon or alpha on common random numbers.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Rank portfolio inventories by their frozen-inventory risk.
    Isorisk {
        #[command(flatten)]
        common: Common,
        /// Inventory vector such as `2,-1`; repeatable. Defaults to the "multi" block's list.
        #[arg(long, allow_hyphen_values = true, value_parser = parse_inventory)]
        inventory: Vec<Vec<i64>>,
    },
    /// Check the closed forms against their brute-force oracles.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Multiplies every tolerance; below 1 tightens the checks.
        #[arg(long, default_value_t = 1.0)]
        tolerance_scale: f64,
    },
}

fn parse_inventory(text: &str) -> Result<Vec<i64>, String> {
    text.split(',')
        .map(|part| part.trim().parse::<i64>().map_err(|e| format!("bad inventory component \"{part}\": {e}")))
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { common, multi } => commands::simulate(&common, multi),
        Command::Compare { common, arms } => commands::compare(&common, &arms),
        Command::Sweep { common, param, values } => commands::sweep(&common, param, &values),
        Command::Isorisk { common, inventory } => commands::isorisk(&common, inventory),
        Command::Verify { common, tolerance_scale } => commands::verify(&common, tolerance_scale),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.code())
        }
    }
}
