//! The `reebsim` command-line harness: configuration, subcommands and the
//! acceptance suite.

pub mod commands;
pub mod config;
pub mod oracle;
pub mod report;
pub mod scenario;
pub mod verify;

use std::ffi::OsString;
use std::fmt::Display;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use config::ExperimentConfig;
pub use report::{Report, ReportRow, Tolerance};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("{context}: {message}")]
    Runtime { context: String, message: String },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::ConfigInvalid(_) => 2,
            _ => 3,
        }
    }
}

/// A module error tagged with the stage that raised it.
pub fn runtime(context: &str, e: impl Display) -> HarnessError {
    HarnessError::Runtime {
        context: context.into(),
        message: e.to_string(),
    }
}

#[derive(Debug, Parser)]
#[command(name = "reebsim", version, about = "Reeb-graph reduction and multi-scale simulation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Include the long Monte Carlo check in `verify`.
    #[arg(long, global = true)]
    pub slow: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Build, validate and export the Reeb graph.
    Reeb,
    /// Tabulate, glue and classify the edge coefficients.
    Coeffs,
    /// First-exit frequencies at a branching vertex against the tables.
    Branch,
    /// Delta sweep of the star exit law and epsilon sweep of exit frequencies.
    Converge,
    /// Limit-process simulation and the limiting distribution.
    Limit,
    /// The acceptance suite.
    Verify,
}

/// Loads the configuration and applies command-line overrides.
pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig, HarnessError> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| HarnessError::ConfigInvalid("--config: a configuration file is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if cli.slow || std::env::var("REEBSIM_SLOW").is_ok_and(|v| v == "1") {
        cfg.verify.slow = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one subcommand inside a pool of `cfg.threads` workers.
pub fn execute(command: Command, cfg: &ExperimentConfig) -> Result<(Report, commands::Artifacts), HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| runtime("threads", e))?;
    pool.install(|| match command {
        Command::Reeb => commands::reeb(cfg),
        Command::Coeffs => commands::coeffs(cfg),
        Command::Branch => commands::branch(cfg),
        Command::Converge => commands::converge(cfg),
        Command::Limit => commands::limit(cfg),
        Command::Verify => Ok((verify::run(cfg), Vec::new())),
    })
}

pub fn write_outputs(dir: &Path, report: &Report, files: &commands::Artifacts) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    for (name, contents) in files {
        std::fs::write(dir.join(name), contents)?;
    }
    std::fs::write(dir.join("report.csv"), report.to_csv())?;
    std::fs::write(dir.join("timings.csv"), report.timings_csv())?;
    Ok(())
}

fn print_rows(report: &Report) {
    for r in &report.rows {
        println!(
            "{} {:<24} {:<48} value={:.6e} reference={:.6e} ({}) {:.1}s",
            if r.pass { "PASS" } else { "FAIL" },
            r.experiment,
            r.quantity,
            r.value,
            r.reference,
            r.provenance,
            r.runtime
        );
    }
}

/// Entry point shared by the binary and the tests. Returns the exit code:
/// 0 all rows pass, 1 some row fails, 2 configuration error, 3 runtime error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = resolve_config(&cli).and_then(|cfg| {
        let (report, files) = execute(cli.command, &cfg)?;
        write_outputs(&cfg.out, &report, &files)?;
        Ok(report)
    });
    match outcome {
        Ok(report) => {
            print_rows(&report);
            if report.passed() {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
