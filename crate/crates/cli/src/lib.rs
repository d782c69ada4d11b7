//! The `flowplex` command line. `run` is the whole program; the binary only
//! forwards `argv` and the exit code, so tests can drive it in-process.

pub mod args;
mod commands;
mod config;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{CommandFactory, Parser};
use flowplex_core::{Error, ErrorCategory};
use serde::Serialize;

pub use args::Cli;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;
pub const EXIT_INTERNAL: i32 = 5;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Core(e) => {
                let kind = match e.category() {
                    ErrorCategory::Input => "input",
                    ErrorCategory::Numerical => "numerical",
                    ErrorCategory::Internal => "internal",
                };
                write!(f, "{kind} error: {e}")
            }
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Input(_) => EXIT_INPUT,
            CliError::Core(e) => match e.category() {
                ErrorCategory::Input => EXIT_INPUT,
                ErrorCategory::Numerical => EXIT_NUMERICAL,
                ErrorCategory::Internal => EXIT_INTERNAL,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// The clap command tree, for help text and doc checks.
pub fn command() -> clap::Command {
    Cli::command()
}

/// Resolved global settings shared by every subcommand.
#[derive(Debug, Clone, Serialize)]
pub struct RunContext {
    pub seed: u64,
    pub threads: usize,
    pub out_dir: PathBuf,
    pub log_level: args::LogLevel,
    pub config: Option<PathBuf>,
}

impl RunContext {
    pub fn output(&self, name: impl AsRef<Path>) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Write `config_echo.json`: every effective value of this run.
    pub fn write_echo(&self, command: &str, effective: &impl Serialize) -> CliResult<()> {
        let echo = serde_json::json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "global": self,
            "effective": effective,
        });
        flowplex_core::io::write_json(&self.output("config_echo.json"), &echo)?;
        Ok(())
    }
}

fn required<T>(v: Option<T>, flag: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::Usage(format!("missing required flag --{flag}")))
}

/// Parse `argv` (program name first), run the subcommand and return the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("flowplex: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    let file = match &cli.global.config {
        Some(path) => config::ConfigFile::read(path)?,
        None => config::ConfigFile::default(),
    };
    let global = cli.global.layered(file.global.clone());
    let ctx = RunContext {
        seed: global.seed.unwrap_or(0),
        threads: global.threads.unwrap_or(1),
        out_dir: global.out_dir.unwrap_or_else(|| PathBuf::from(".")),
        log_level: global.log_level.unwrap_or(args::LogLevel::Warn),
        config: global.config,
    };
    let _ = env_logger::Builder::new()
        .filter_level(ctx.log_level.into())
        .format_timestamp(None)
        .try_init();
    fs::create_dir_all(&ctx.out_dir)
        .map_err(|e| CliError::Input(format!("cannot create {}: {e}", ctx.out_dir.display())))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.threads)
        .build()
        .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    let command = cli.command;
    pool.install(|| commands::dispatch(command, &file, &ctx))
}
