//! `cadreward`: compile, judge, evaluate and repair CAD sequences from the shell.
//!
//! Exit codes: 0 ok, 1 I/O or usage, 2 compile failure, 3 rejected,
//! 4 invalid ground truth, 5 generator failure. JSON goes to stdout,
//! everything meant for humans goes to stderr.

mod commands;
mod config;
mod files;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "cadreward",
    version,
    about = "Compile, judge, evaluate and repair sketch-and-extrude CAD sequences"
)]
struct Cli {
    /// TOML file with run settings (same keys as the long flags, with underscores).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compile a sequence; optionally write its mesh (OBJ) and a surface sample (PLY).
    Compile {
        seq: PathBuf,
        #[arg(long)]
        mesh_out: Option<PathBuf>,
        #[arg(long)]
        points_out: Option<PathBuf>,
        /// Points to sample for --points-out (defaults to n_points).
        #[arg(short = 'n', long)]
        n: Option<usize>,
    },
    /// Judge a prediction against its ground truth.
    Judge { pred: PathBuf, gt: PathBuf },
    /// Build a binary preference dataset (JSONL) from name-paired directories.
    Dataset {
        pred_dir: PathBuf,
        gt_dir: PathBuf,
        out: PathBuf,
        /// Directory of `<stem>.txt` prompt files; the file stem is used otherwise.
        #[arg(long)]
        prompt_dir: Option<PathBuf>,
    },
    /// Build a paired (chosen, rejected) dataset from a JSONL of candidate groups.
    Pairs { groups: PathBuf, out: PathBuf },
    /// Evaluate predictions against ground truths; writes a JSON report and a CSV.
    Eval {
        pred_dir: PathBuf,
        gt_dir: PathBuf,
        report_out: PathBuf,
        /// CSV destination (defaults to the report path with a `.csv` extension).
        #[arg(long)]
        csv_out: Option<PathBuf>,
    },
    /// Run the generate/review loop for the prompt in a file.
    Review {
        prompt: PathBuf,
        /// Also write the trace here.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// KTO loss and gradients for a JSONL batch of log-probabilities.
    Kto {
        batch: PathBuf,
        /// Use this reference point instead of estimating it from the batch.
        #[arg(long)]
        z0: Option<f64>,
    },
    /// SFT cross-entropy for a JSONL file of per-token probability arrays.
    Sft { batch: PathBuf },
    /// Convert a DeepCAD-style JSON model into sequence text.
    Import { json: PathBuf, out: PathBuf },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error("unpaired files: {}", .0.join(", "))]
    Unpaired(Vec<String>),
    #[error("malformed rows: {}", .0.join("; "))]
    MalformedRows(Vec<String>),
    #[error("compilation failed")]
    CompileFailed,
    #[error("prediction rejected")]
    Rejected,
    #[error("invalid ground truth: {0}")]
    GroundTruth(String),
    #[error("generator failed: {0}")]
    Generator(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. }
            | CliError::Usage(_)
            | CliError::Unpaired(_)
            | CliError::MalformedRows(_) => 1,
            CliError::CompileFailed => 2,
            CliError::Rejected => 3,
            CliError::GroundTruth(_) => 4,
            CliError::Generator(_) => 5,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(
        cli.config.as_deref(),
        |k| std::env::var(k).ok(),
        &cli.overrides,
    )
    .map_err(CliError::Usage)?;
    log::debug!("resolved config: {cfg:?}");
    match cli.command {
        Command::Compile {
            seq,
            mesh_out,
            points_out,
            n,
        } => commands::compile(&cfg, &seq, mesh_out.as_deref(), points_out.as_deref(), n),
        Command::Judge { pred, gt } => commands::judge(&cfg, &pred, &gt),
        Command::Dataset {
            pred_dir,
            gt_dir,
            out,
            prompt_dir,
        } => commands::dataset(&cfg, &pred_dir, &gt_dir, &out, prompt_dir.as_deref()),
        Command::Pairs { groups, out } => commands::pairs(&cfg, &groups, &out),
        Command::Eval {
            pred_dir,
            gt_dir,
            report_out,
            csv_out,
        } => {
            let csv_out = csv_out.unwrap_or_else(|| report_out.with_extension("csv"));
            commands::eval(&cfg, &pred_dir, &gt_dir, &report_out, &csv_out)
        }
        Command::Review { prompt, trace_out } => {
            commands::review(&cfg, &prompt, trace_out.as_deref())
        }
        Command::Kto { batch, z0 } => commands::kto(&cfg, &batch, z0),
        Command::Sft { batch } => commands::sft(&cfg, &batch),
        Command::Import { json, out } => commands::import(&cfg, &json, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
