//! Command-line experiment harness.
//!
//! ```text
//! mirrormatch <command> [--config PATH] [--set key=value ...] [--out DIR] [--seed N] [--paper-scale]
//! ```
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric failure, 1 I/O.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, ValueEnum};

use crate::error::Error;
pub use config::{parse_config, ConfigError, ModelConfig, NoiseConvention};
pub use output::{Cell, Column, Table};

/// Environment variable that fixes the worker count.
pub const WORKERS_ENV: &str = "MIRRORMATCH_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// In-person vs AI distances on the standard dimension grid.
    Table1,
    /// Same estimators on a dense grid plus analytic overlays.
    Figure2,
    /// AI-equivalent in-person sample sizes.
    Mstar,
    /// Data-rich vs data-poor match probabilities.
    Groups,
    /// Sequential search policy payoffs.
    Seqsearch,
    /// Noise-convention discriminator.
    Calibrate,
}

impl std::str::FromStr for Command {
    type Err = String;

    /// Accepts the command names used on the command line.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <Command as ValueEnum>::from_str(s, false).map_err(|_| format!("unknown command '{s}'"))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "mirrormatch",
    version,
    about = "Monte Carlo and analytic experiments for clone-based matching"
)]
pub struct Args {
    pub command: Command,
    /// Config file with `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Inline override, applied after the config file. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output root; results go to `<out>/<config hash>/`.
    #[arg(long, default_value = "mirrormatch-out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Start from reps = 1000, n = 10000 instead of the desk-scale defaults.
    #[arg(long)]
    pub paper_scale: bool,
}

/// Worker count from [`WORKERS_ENV`], if set to a positive integer.
pub fn workers_from_env() -> Result<Option<usize>, ConfigError> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(ConfigError {
                line: None,
                key: WORKERS_ENV.into(),
                message: format!("expected a positive integer, got '{v}'"),
            }),
        },
    }
}

/// Runs one command and returns its table.
pub fn execute(command: Command, cfg: &ModelConfig) -> crate::Result<Table> {
    match command {
        Command::Table1 => commands::table1(cfg),
        Command::Figure2 => commands::figure2(cfg),
        Command::Mstar => commands::mstar(cfg),
        Command::Groups => commands::groups(cfg),
        Command::Seqsearch => commands::seqsearch(cfg),
        Command::Calibrate => commands::calibrate(cfg).map(|c| c.table),
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        // library domain errors here can only come from configured values
        Error::Domain { .. } => EXIT_CONFIG,
        Error::NonConvergence { .. } => EXIT_NUMERIC,
    }
}

/// Parses `argv`, runs the command, writes outputs, returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let cfg = match parse_config(
        args.config.as_deref(),
        &args.set,
        args.seed,
        args.paper_scale,
    ) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let workers = match workers_from_env() {
        Ok(w) => w,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let job = || execute(args.command, &cfg).map(|t| (t, rayon::current_num_threads()));
    let result = match workers {
        Some(n) => crate::simulate::with_workers(n, job),
        None => job(),
    };
    let (table, used) = match result {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    match output::write_run(&args.out, &table, &cfg, used) {
        Ok(dir) => {
            println!("{}", dir.join(output::csv_name(table.command)).display());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: writing results under {}: {e}", args.out.display());
            EXIT_IO
        }
    }
}
