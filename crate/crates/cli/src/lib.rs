//! `cellres` command line: single runs, replicated sweeps, oracle
//! validation, analytic optimisation and controller training.
//!
//! Exit status is 0 on success, 1 when a check fails or a run breaks, and 2
//! for bad input (unreadable files, invalid configs, unsupported requests).

pub mod error;
pub mod format;
pub mod optimize;
pub mod run;
pub mod sweep;
pub mod train;
pub mod validate;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use cellres_core::NetworkConfig;
use clap::{Parser, Subcommand};

pub use error::{CliError, CliResult};
use sweep::{SweepSpec, SweepVariable};

#[derive(Debug, Parser)]
#[command(name = "cellres", version, about = "Four-class channel reservation simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one configuration and write one CSV row per (window, cell).
    Run {
        /// JSON config; the built-in default configuration when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replicate a configuration over a list of values of one variable.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Sweep CSV; the three figure series are written beside it.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        replications: u32,
        #[arg(long, value_enum)]
        variable: SweepVariable,
        /// Comma-separated, strictly increasing.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        values: Vec<f64>,
    },
    /// Compare simulated blocking with Erlang-B and M/M/1/2.
    Validate {
        /// Pure-loss config for the Erlang-B part; a built-in one when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 10)]
        replications: u32,
        /// Run with deliberately broken pool accounting; validation should fail.
        #[arg(long)]
        inject_fault: bool,
    },
    /// Print the analytic optimum reservation of a pure-loss config as JSON.
    Optimize {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a learning controller for a number of episodes.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        episodes: u64,
        /// Controller state file: resumed from if present, then overwritten.
        #[arg(long)]
        state: Option<PathBuf>,
        /// Learning-curve CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn load_config(path: Option<&Path>, seed: Option<u64>) -> CliResult<NetworkConfig> {
    let mut cfg = match path {
        Some(p) => NetworkConfig::from_path(p)?,
        None => NetworkConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

pub fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::Run { config, seed, out } => {
            let cfg = load_config(config.as_deref(), seed)?;
            run::cmd_run(&cfg, out.as_deref())
        }
        Command::Sweep { config, seed, out, replications, variable, values } => {
            let base = load_config(config.as_deref(), seed)?;
            sweep::cmd_sweep(&SweepSpec { variable, values, replications, base, out }).map(drop)
        }
        Command::Validate { config, seed, replications, inject_fault } => {
            let mut cfg = match config {
                Some(p) => NetworkConfig::from_path(&p)?,
                None => validate::erlang_config(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            validate::cmd_validate(&cfg, replications, inject_fault).map(drop)
        }
        Command::Optimize { config, out } => {
            let cfg = load_config(config.as_deref(), None)?;
            optimize::cmd_optimize(&cfg, out.as_deref()).map(drop)
        }
        Command::Train { config, seed, episodes, state, out } => {
            let cfg = load_config(config.as_deref(), seed)?;
            train::cmd_train(&cfg, episodes, state.as_deref(), out.as_deref()).map(drop)
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit status.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
