//! Command-line front end for the dybm library: online training on the
//! noisy sine (or user CSV data), figure-style (mu, d) sweeps, and
//! checkpointing.

mod commands;
mod config;
mod output;
mod snapshot;

use clap::{Args, CommandFactory, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "dybm",
    version,
    about = "Online time-series learning with dynamic Boltzmann machines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration and write per-step and summary CSV files.
    Train(TrainArgs),
    /// Run a grid of (mu, d) cells: averaged error curves, a timing table,
    /// and a summary table.
    Sweep(SweepArgs),
    /// Save a training checkpoint or restore one and keep going.
    Snapshot(SnapshotArgs),
}

/// Model and experiment settings shared by `train` and `snapshot save`.
/// Every flag overrides the matching config-file key; anything left unset
/// falls back to a default with a notice on stderr.
#[derive(Args, Debug)]
struct ModelArgs {
    /// Model kind: gaussian-dybm or var.
    #[arg(long)]
    model: Option<String>,
    /// Conduction delay (number of lags). Required.
    #[arg(long)]
    d: Option<usize>,
    /// Trace decay rate in [0, 1); must be 0 for var.
    #[arg(long)]
    mu: Option<f64>,
    /// Number of trace regressors.
    #[arg(long)]
    traces: Option<usize>,
    /// AdaGrad base learning rate.
    #[arg(long)]
    eta0: Option<f64>,
    /// Online steps per run.
    #[arg(long)]
    steps: Option<usize>,
    /// Independent runs to average.
    #[arg(long)]
    runs: Option<usize>,
    /// Master seed; run k draws from stream k.
    #[arg(long)]
    seed: Option<u64>,
    /// Rolling mean-squared-error window width.
    #[arg(long)]
    mse_window: Option<usize>,
    /// Sine period in steps.
    #[arg(long)]
    period: Option<f64>,
    /// Sine amplitude.
    #[arg(long)]
    amplitude: Option<f64>,
    /// Standard deviation of the additive noise.
    #[arg(long)]
    noise_std: Option<f64>,
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Per-step CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary CSV output path.
    #[arg(long)]
    summary_out: Option<PathBuf>,
    /// Train on the rows of this CSV (one column per unit) instead of the
    /// synthetic sine.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Comma-separated trace decay rates; 0 is added when missing.
    #[arg(long, value_delimiter = ',')]
    mu: Option<Vec<f64>>,
    /// Comma-separated conduction delays.
    #[arg(long, value_delimiter = ',')]
    d: Option<Vec<usize>>,
    /// Number of trace regressors.
    #[arg(long)]
    traces: Option<usize>,
    /// AdaGrad base learning rate.
    #[arg(long)]
    eta0: Option<f64>,
    /// Online steps per run.
    #[arg(long)]
    steps: Option<usize>,
    /// Independent runs to average per cell.
    #[arg(long)]
    runs: Option<usize>,
    /// Master seed; run k draws from stream k.
    #[arg(long)]
    seed: Option<u64>,
    /// Rolling mean-squared-error window width.
    #[arg(long)]
    mse_window: Option<usize>,
    /// Sine period in steps.
    #[arg(long)]
    period: Option<f64>,
    /// Sine amplitude.
    #[arg(long)]
    amplitude: Option<f64>,
    /// Standard deviation of the additive noise.
    #[arg(long)]
    noise_std: Option<f64>,
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for curve, timing, and summary files.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SnapshotArgs {
    #[command(subcommand)]
    action: SnapshotAction,
}

#[derive(Subcommand, Debug)]
enum SnapshotAction {
    /// Train a single run and save a checkpoint of everything needed to
    /// resume it.
    Save(SnapshotSaveArgs),
    /// Restore a checkpoint and continue the run.
    Load(SnapshotLoadArgs),
}

#[derive(Args, Debug)]
struct SnapshotSaveArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Checkpoint output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SnapshotLoadArgs {
    /// Checkpoint to restore.
    #[arg(long = "in")]
    input: PathBuf,
    /// Steps to run after restoring.
    #[arg(long)]
    steps: Option<usize>,
    /// Per-step CSV for the resumed segment.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Command failures carrying their process exit code: 2 for configuration
/// problems, 3 for numeric divergence, 4 for snapshot problems, 1 for
/// everything else (I/O).
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Snapshot(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Snapshot(_) => 4,
            CliError::Io(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m)
            | CliError::Numeric(m)
            | CliError::Snapshot(m)
            | CliError::Io(m) => m,
        }
    }
}

impl From<dybm::DybmError> for CliError {
    fn from(e: dybm::DybmError) -> Self {
        match e {
            dybm::DybmError::NonFinite { .. } => {
                CliError::Numeric(format!("numeric divergence: {e}"))
            }
            other => CliError::Config(other.to_string()),
        }
    }
}

/// Builds a configuration error whose message ends with the usage line of
/// the named subcommand path, e.g. `["snapshot", "save"]`.
pub fn usage_error(path: &[&str], message: &str) -> CliError {
    let mut cmd = Cli::command();
    cmd.build();
    let mut sub = &mut cmd;
    for name in path {
        sub = sub
            .find_subcommand_mut(name)
            .expect("subcommand path is spelled correctly");
    }
    let usage = sub.render_usage();
    CliError::Config(format!(
        "{message}\n\n{usage}\n\nFor more information, try '--help'."
    ))
}

/// Worker-thread cap from DYBM_THREADS; unset or invalid values fall back
/// to the machine's parallelism.
fn thread_cap() -> Option<usize> {
    let raw = std::env::var("DYBM_THREADS").ok()?;
    match raw.trim().parse::<usize>() {
        Ok(count) if count >= 1 => Some(count),
        _ => {
            eprintln!(
                "notice: ignoring invalid DYBM_THREADS value {raw:?}; \
                 using machine parallelism"
            );
            None
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let threads = thread_cap();
    let result = match cli.command {
        Command::Train(args) => commands::train(&args, threads),
        Command::Sweep(args) => commands::sweep(&args, threads),
        Command::Snapshot(args) => match args.action {
            SnapshotAction::Save(save) => snapshot::save(&save),
            SnapshotAction::Load(load) => snapshot::load(&load),
        },
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message());
        std::process::exit(e.code());
    }
}
