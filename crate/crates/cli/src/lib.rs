//! Driver for `epictrl`: reads a JSON experiment config, runs a simulation,
//! an optimal vaccination solve or a sweep over control bounds, and writes
//! CSV and JSON results with a checksum manifest.
//!
//! Exit codes: 0 on success, 2 for configuration problems, 3 when a solver
//! or the file system fails. Failures print one JSON record to stderr.

pub mod config;
pub mod output;
pub mod scenario;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde_json::json;

pub use config::{ExperimentConfig, InitialCondition, Scenario};
pub use output::{ManifestEntry, OutputDir};
pub use scenario::{Experiment, OptimizeOutcome, Outcome, SimulateOutcome};

pub const THREADS_ENV: &str = "EPICTRL_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error(transparent)]
    Solver(epictrl_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config { field: field.into(), reason: reason.into() }
    }

    /// Errors while building the problem come from the configuration.
    pub(crate) fn setup(err: epictrl_core::Error) -> Self {
        match err {
            epictrl_core::Error::Config { field, reason } => CliError::Config { field, reason },
            other => CliError::config("config", other.to_string()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Solver(_) | CliError::Io { .. } => 3,
        }
    }

    /// Machine-readable form printed on stderr.
    pub fn record(&self) -> serde_json::Value {
        let kind = match self {
            CliError::Config { .. } => "config",
            CliError::Solver(_) => "solver",
            CliError::Io { .. } => "io",
        };
        let mut rec = json!({
            "error": kind,
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        match self {
            CliError::Config { field, .. } => rec["field"] = json!(field),
            CliError::Io { path, .. } => rec["path"] = json!(path.display().to_string()),
            CliError::Solver(_) => {}
        }
        rec
    }
}

#[derive(Debug, Clone, Parser)]
#[command(name = "epictrl", version, about = "Age- and space-structured SVIR simulations and optimal vaccination")]
pub struct Cli {
    /// What to run.
    #[arg(value_enum)]
    pub scenario: Scenario,
    /// JSON experiment configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides the config's `output`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; falls back to EPICTRL_THREADS, then to all cores.
    #[arg(long)]
    pub threads: Option<usize>,
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::config("threads", format!("{THREADS_ENV}=`{v}` is not a count")))?,
            ),
            Err(_) => None,
        },
    };
    if n == Some(0) {
        return Err(CliError::config("threads", "must be at least 1"));
    }
    Ok(n)
}

/// Runs a scenario from an in-memory config and writes its files under `out`.
pub fn execute_config(
    scenario: Scenario,
    config: ExperimentConfig,
    out: &Path,
) -> Result<(Outcome, Vec<ManifestEntry>), CliError> {
    config.validate(scenario)?;
    let exp = Experiment::new(config)?;
    let mut dir = OutputDir::create(out)?;
    let outcome = match scenario {
        Scenario::Simulate => Outcome::Simulate(scenario::simulate(&exp, &mut dir)?),
        Scenario::Optimize => Outcome::Optimize(Box::new(scenario::optimize_run(&exp, &mut dir)?)),
        Scenario::Sweep => Outcome::Sweep(scenario::sweep(&exp, &mut dir)?),
    };
    let manifest = dir.finish()?;
    Ok((outcome, manifest))
}

/// Parsed-argument entry point.
pub fn execute(cli: &Cli) -> Result<(Outcome, Vec<ManifestEntry>), CliError> {
    let config = ExperimentConfig::load(&cli.config)?;
    let out = cli.out.clone().unwrap_or_else(|| config.output.clone());
    let threads = thread_count(cli.threads)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::config("threads", e.to_string()))?;
    pool.install(|| execute_config(cli.scenario, config, &out))
}

/// Full command-line entry point; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version.
            print!("{e}");
            return 0;
        }
        Err(e) => {
            let err = CliError::config("arguments", e.to_string().trim_end().to_string());
            eprintln!("{}", err.record());
            return err.exit_code();
        }
    };
    match execute(&cli) {
        Ok((_, manifest)) => {
            let out = cli
                .out
                .clone()
                .unwrap_or_else(|| ExperimentConfig::load(&cli.config).map(|c| c.output).unwrap_or_default());
            println!("wrote {} files to {}", manifest.len() + 1, out.display());
            0
        }
        Err(err) => {
            eprintln!("{}", err.record());
            err.exit_code()
        }
    }
}
