//! Batch front end for `dpc-core`: reads a scenario file, runs one command and
//! writes CSV or JSON.
//!
//! Exit codes: 0 success, 1 a `verify` check failed, 2 bad input (parse,
//! validation or precondition), 3 I/O.

pub mod commands;
pub mod table;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dpc_core::lemma_eval::{AlphaPolicy, LemmaConfig, SweepAxis};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;
use table::Table;
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(
    name = "dpc",
    version,
    about = "Achievable-rate lower bounds for dirty paper coding"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Scenario file (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Monte-Carlo sample count.
    #[arg(long, global = true, default_value_t = 200_000, value_name = "N")]
    pub samples: usize,
    /// Output file; stdout when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads; defaults to the number of cores. Output does not depend on it.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Also write a JSON run manifest (including wall-clock time) here.
    #[arg(long, global = true, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Closed-form bounds per gain atom.
    Bound,
    /// Monte-Carlo evaluation of the general bound.
    Lemma(LemmaArgs),
    /// Cross-checks on the scenario; exits 1 if any check fails.
    Verify(LemmaArgs),
    /// Monte-Carlo and closed-form totals along one axis.
    Sweep(SweepArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Bound => "bound",
            Command::Lemma(_) => "lemma",
            Command::Verify(_) => "verify",
            Command::Sweep(_) => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    TiedToBeta,
    Free,
}

#[derive(Debug, Clone, Args)]
pub struct LemmaArgs {
    /// Nearest-neighbour order of the entropy estimator.
    #[arg(long, default_value_t = dpc_core::entropy::DEFAULT_K)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = PolicyArg::TiedToBeta)]
    pub alpha_policy: PolicyArg,
    /// Refinement grid points per axis (odd).
    #[arg(long, default_value_t = 21)]
    pub grid: usize,
    /// Refinement half-width relative to the warm-start β.
    #[arg(long, default_value_t = 0.2)]
    pub span: f64,
}

impl LemmaArgs {
    pub fn config(&self, common: &Common) -> LemmaConfig {
        LemmaConfig {
            n_samples: common.samples,
            k: self.k,
            alpha_policy: match self.alpha_policy {
                PolicyArg::TiedToBeta => AlphaPolicy::TiedToBeta,
                PolicyArg::Free => AlphaPolicy::Free,
            },
            refine_grid: self.grid,
            refine_span: self.span,
            seed: common.seed,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_parser = parse_axis)]
    pub axis: SweepAxis,
    /// Comma-separated axis values: numbers, or family names for `family`.
    #[arg(long, allow_hyphen_values = true)]
    pub values: String,
    #[command(flatten)]
    pub lemma: LemmaArgs,
}

fn parse_axis(s: &str) -> Result<SweepAxis, String> {
    s.parse()
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

/// Result of a command before it is written anywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub table: Table,
    /// Non-fatal per-item problems, printed to stderr.
    pub warnings: Vec<String>,
    /// Set by `verify` when a check fails.
    pub failed: bool,
    /// `verify` prints an aligned table instead of CSV.
    pub human: bool,
}

impl Report {
    pub fn new(table: Table) -> Self {
        Self {
            table,
            warnings: Vec::new(),
            failed: false,
            human: false,
        }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.table.to_json(),
            Format::Csv if self.human => self.table.to_text(),
            Format::Csv => self.table.to_csv(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub scenario: Option<String>,
    pub seed: u64,
    pub n_samples: usize,
    pub output: Option<String>,
    pub format: Format,
    pub tool_version: &'static str,
    pub wall_clock_seconds: f64,
    pub rows: Vec<serde_json::Value>,
}

/// Runs the command inside a pool of the requested size.
pub fn run(cli: &Cli) -> Result<Report, CliError> {
    match cli.common.threads {
        Some(0) => Err(CliError::Input("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Input(format!("thread pool: {e}")))?
            .install(|| commands::dispatch(cli)),
        None => commands::dispatch(cli),
    }
}

fn write_file(path: &Path, body: &str) -> Result<(), CliError> {
    std::fs::write(path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Runs, writes the output (and manifest) and returns the process exit code.
pub fn execute(cli: &Cli) -> u8 {
    let start = Instant::now();
    let report = match run(cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let body = report.render(cli.common.format);
    let written = match &cli.common.out {
        Some(path) => write_file(path, &body),
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    if let Some(path) = &cli.common.manifest {
        let manifest = RunManifest {
            command: cli.command.name(),
            scenario: cli.common.config.as_ref().map(|p| p.display().to_string()),
            seed: cli.common.seed,
            n_samples: cli.common.samples,
            output: cli.common.out.as_ref().map(|p| p.display().to_string()),
            format: cli.common.format,
            tool_version: env!("CARGO_PKG_VERSION"),
            wall_clock_seconds: start.elapsed().as_secs_f64(),
            rows: report.table.to_json_rows(),
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        if let Err(e) = write_file(path, &text) {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    }
    if report.failed {
        1
    } else {
        0
    }
}
