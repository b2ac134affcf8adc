//! Command-line driver for `cverify`: the `verify`, `monitor` and `conformal`
//! verbs.
//!
//! Exit codes: 0 on success, 2 for configuration or input errors, 3 when the
//! simulator fails. Every error is also written to stderr as one line of JSON.

pub mod config;
mod commands;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use thiserror::Error;

use cverify::stl::StlError;

pub use commands::{run_conformal, run_monitor, run_verify, MonitorReport};
pub use config::{ConfigLayer, ModelSource, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SIMULATOR: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Stl(#[from] StlError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Simulator(String),
}

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io { path: path.to_path_buf(), message: e.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Simulator(_) => EXIT_SIMULATOR,
            _ => EXIT_CONFIG,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "ConfigError",
            CliError::Stl(StlError::Parse { .. }) => "ParseError",
            CliError::Stl(StlError::Interval { .. }) => "IntervalError",
            CliError::Stl(StlError::InsufficientHorizon { .. }) => "InsufficientHorizon",
            CliError::Stl(StlError::OutOfDomain { .. }) => "OutOfDomain",
            CliError::Stl(StlError::IndexOutOfRange { .. }) => "IndexOutOfRange",
            CliError::Io { .. } => "IoError",
            CliError::Input(_) => "InputError",
            CliError::Simulator(_) => "SimFailure",
        }
    }

    /// Single-line JSON description.
    pub fn diagnostic(&self) -> String {
        let mut d = json!({ "level": "error", "kind": self.kind(), "message": self.to_string() });
        if let CliError::Stl(StlError::Parse { position, .. }) = self {
            d["position"] = json!(position);
        }
        if let CliError::Io { path, .. } = self {
            d["path"] = json!(path.display().to_string());
        }
        d.to_string()
    }
}

#[derive(Debug, Parser)]
#[command(name = "cverify", version, about = "Statistical verification of parameterized models against STL requirements")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Partition a parameter box into safe, unsafe and unknown regions
    Verify(VerifyArgs),
    /// Robustness of a recorded trace
    Monitor(MonitorArgs),
    /// Fit a surrogate with a split-conformal band to (theta, rho) data
    Conformal(ConformalArgs),
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// TOML file with the same keys as the flags; flags win
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub layer: ConfigLayer,
}

#[derive(Debug, Args)]
pub struct MonitorArgs {
    /// CSV with header time,x0,x1,...
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long)]
    pub spec: String,
    /// Evaluation time
    #[arg(long, default_value_t = 0.0)]
    pub time: f64,
}

#[derive(Debug, Args)]
pub struct ConformalArgs {
    /// CSV whose rows are theta_0,...,theta_{k-1},rho (an optional header row is skipped)
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long = "reg", default_value = "gp")]
    pub regressor: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("CVERIFY_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Parses `args` (including the program name), runs the verb and returns
/// the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return EXIT_OK;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("{}", json!({ "level": "error", "kind": "UsageError", "message": first }));
            return EXIT_CONFIG;
        }
    };
    let outcome = match cli.command {
        Command::Verify(a) => {
            let layer = match &a.config {
                Some(path) => ConfigLayer::load(path).map(|base| base.overlay(a.layer)),
                None => Ok(a.layer),
            };
            layer.and_then(RunConfig::resolve).and_then(|cfg| run_verify(&cfg))
        }
        Command::Monitor(a) => run_monitor(&a.trace, &a.spec, a.time).map(|r| {
            println!("{}", r.to_json());
            EXIT_OK
        }),
        Command::Conformal(a) => run_conformal(&a.data, a.alpha, &a.regressor, a.seed).map(|text| {
            println!("{text}");
            EXIT_OK
        }),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            e.exit_code()
        }
    }
}
