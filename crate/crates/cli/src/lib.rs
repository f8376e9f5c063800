//! Command-line driver: configuration loading, command dispatch and report
//! emission for `hgframe-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::commands::CheckKind;
use crate::config::{Overrides, RunConfig};
use crate::error::{CliError, CliResult, EXIT_FAIL, EXIT_PASS};
use crate::report::{write_all, Outcome, RunInfo, RunReport};

#[derive(Debug, Parser)]
#[command(name = "hgframe", version, about = "Bracket maps and fiberwise dual frames on the Heisenberg group")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory for report.json and CSV traces.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Number of midpoint torus points; replaces the configured grid.
    #[arg(long, global = true)]
    pub grid: Option<usize>,

    /// Verdict tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,

    /// Seed for the random lattice combinations
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Brackets of the configured fields against their closed forms.
    Bracket,
    /// One of the orthogonality, biorthogonality, reproducing, Bessel or
    /// Parseval checks.
    Check {
        #[arg(value_enum)]
        which: CheckKind,
    },
    /// Sweeps t and compares the Gabor condition with the reproducing residuals.
    GaborScan,
    /// Classifies a candidate dual given fiber by fiber.
    Classify,
}

impl Command {
    pub fn label(&self) -> String {
        match self {
            Command::Bracket => "bracket".into(),
            Command::Check { which } => format!("check {}", which.name()),
            Command::GaborScan => "gabor-scan".into(),
            Command::Classify => "classify".into(),
        }
    }
}

pub fn execute(command: &Command, cfg: &RunConfig) -> CliResult<Outcome> {
    match command {
        Command::Bracket => commands::cmd_bracket(cfg),
        Command::Check { which } => commands::cmd_check(cfg, *which),
        Command::GaborScan => commands::cmd_gabor_scan(cfg),
        Command::Classify => commands::cmd_classify(cfg),
    }
}

fn run_inner(cli: &Cli) -> CliResult<(Outcome, PathBuf)> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    cfg.apply(&Overrides {
        grid: cli.grid,
        tol: cli.tol,
        seed: cli.seed,
        out: cli.out.clone(),
    })?;
    let jobs = cli.jobs.unwrap_or_else(rayon::current_num_threads).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {jobs} workers: {e}")))?;
    let start = Instant::now();
    let outcome = pool.install(|| execute(&cli.command, &cfg))?;
    let info = RunInfo::new(start.elapsed(), jobs);
    let report = RunReport::new(&cli.command.label(), &cfg, &outcome, info);
    let dir = cfg.output.dir.clone().unwrap_or_else(|| PathBuf::from("hgframe-out"));
    let written = write_all(&dir, &report, &outcome.traces)?;
    Ok((outcome, written))
}

/// Runs the CLI and returns the process exit status.
pub fn run(cli: &Cli) -> i32 {
    match run_inner(cli) {
        Ok((outcome, path)) => {
            let code = if outcome.verdict == Some(false) { EXIT_FAIL } else { EXIT_PASS };
            let verdict = match outcome.verdict {
                Some(true) => "pass",
                Some(false) => "fail",
                None => "done",
            };
            println!("{}: {verdict} ({})", cli.command.label(), path.display());
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
