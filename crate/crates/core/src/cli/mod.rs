//! The `hpnet` command line. Exit codes: 0 success, 1 a check or run
//! failed, 2 usage, configuration or I/O error.

mod commands;
mod run_config;
mod selftest;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use run_config::{RunConfig, DEFAULT_CHANNELS};
pub use selftest::{run_checks, step_gradient_error, CheckOutcome, GRAD_TOLERANCE};

use crate::error::HpnetError;

#[derive(Debug, Parser)]
#[command(
    name = "hpnet",
    version,
    about = "Hierarchical predictive network for synthetic video"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a bouncing-shapes dataset file.
    GenData(GenDataArgs),
    /// Train a network and write a checkpoint plus a loss log.
    Train(TrainArgs),
    /// Roll a trained network forward and export frames as PGM.
    Predict(PredictArgs),
    /// Score rollouts against ground truth and the copy-last-frame baseline.
    Eval(EvalArgs),
    /// Run the prediction- and familiarity-suppression protocols.
    Neurophys(NeurophysArgs),
    /// Gradient checks and oracle equivalences.
    Selftest,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of sequences.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 40)]
    pub frames: usize,
    /// `HxW` or a single size for square frames.
    #[arg(long, default_value = "32x32")]
    pub frame_size: String,
    #[arg(long, default_value_t = 2)]
    pub objects: usize,
    #[arg(long, default_value_t = 1)]
    pub max_speed: usize,
    /// A movement class name, or `mixed` to cycle through all six.
    #[arg(long, default_value = "diagonal")]
    pub motion: String,
    /// Output dataset file.
    #[arg(long, default_value = "dataset.hpnd")]
    pub out: PathBuf,
}

/// Settings shared by every command that builds a network. Flags override
/// the `--config` file.
#[derive(Debug, Args, Default)]
pub struct NetArgs {
    /// `key=value` run configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// ff, bf or bb.
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub levels: Option<usize>,
    /// Comma-separated channel count per level.
    #[arg(long)]
    pub channels: Option<String>,
    #[arg(long)]
    pub block_depth: Option<usize>,
    #[arg(long)]
    pub frame_size: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub net: NetArgs,
    /// Training dataset; generated from the seed when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub val_data: Option<PathBuf>,
    /// Sequences to generate when no dataset is given.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 40)]
    pub frames: usize,
    /// Output directory for `checkpoint.hpnc` and `train_log.tsv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Continue from this checkpoint; `--epochs` more epochs are run.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset to take the sequence from; generated from the seed when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub seed_frames: usize,
    #[arg(long, default_value_t = 20)]
    pub horizon: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Score a trained network's rollouts.
    #[arg(long, conflicts_with = "pred_dir")]
    pub checkpoint: Option<PathBuf>,
    /// Score the `seed_`, `pred_` and `gt_` frames written by `predict`.
    #[arg(long)]
    pub pred_dir: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Sequences to generate when no dataset is given.
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub seed_frames: usize,
    #[arg(long, default_value_t = 20)]
    pub horizon: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct NeurophysArgs {
    #[command(flatten)]
    pub net: NetArgs,
    /// Start from trained parameters instead of a fresh initialization.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Wall-clock cap per exposure run, in seconds.
    #[arg(long, default_value_t = 900.0)]
    pub max_seconds: f64,
    #[arg(long, default_value_t = 8)]
    pub pairs: usize,
    /// Images per familiar and per novel set.
    #[arg(long, default_value_t = 25)]
    pub set_size: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Exit status for a failed command.
pub fn exit_code(err: &HpnetError) -> u8 {
    match err {
        HpnetError::Config { .. } | HpnetError::Io(_) | HpnetError::Format { .. } | HpnetError::Contract(_) => 2,
        HpnetError::Tensor(_)
        | HpnetError::NonFiniteGradient(_)
        | HpnetError::Diverged { .. }
        | HpnetError::Undefined(_) => 1,
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let result = match cli.command {
        Command::GenData(a) => commands::gen_data(&a),
        Command::Train(a) => commands::train(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Neurophys(a) => commands::neurophys(&a),
        Command::Selftest => return selftest::selftest(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
