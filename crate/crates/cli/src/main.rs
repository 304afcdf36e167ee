//! `qksvm`: quantum kernel SVM experiments from a JSON config.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{config_error, ConfigError, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "qksvm", version, about = "Quantum kernel SVM experiments")]
struct Cli {
    /// Experiment config (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for kernel evaluation (1 runs sequentially).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Exact, sampled and corrected train/test kernel matrices.
    Kernel,
    /// LOOCV over the C grid on saved kernels, then test accuracy.
    TrainEval,
    /// Accuracy against training-set size for quantum and RBF kernels.
    LearningCurve,
    /// Pick the CV fold closest to the mean validation score.
    SelectDataset,
    /// Cross-validated accuracy against the number of shots.
    ShotStudy,
    /// Kernel magnitude and CV accuracy over encoding constants.
    GridSearch,
    /// Estimate readout rates from a simulated calibration run.
    Calibrate,
    /// Best chain of qubits on a device graph.
    SelectQubits,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Kernel => "kernel",
            Command::TrainEval => "train-eval",
            Command::LearningCurve => "learning-curve",
            Command::SelectDataset => "select-dataset",
            Command::ShotStudy => "shot-study",
            Command::GridSearch => "grid-search",
            Command::Calibrate => "calibrate",
            Command::SelectQubits => "select-qubits",
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (mut cfg, config_bytes) = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => {
            let cfg = ExperimentConfig::default();
            let bytes = serde_json::to_vec(&cfg)?;
            (cfg, bytes)
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    cfg.validate()?;
    let execution = configure_threads(cli.threads)?;
    let ctx = commands::Context::new(cfg, &config_bytes, execution, cli.threads, cli.command.name())?;
    match cli.command {
        Command::Kernel => commands::kernel(ctx),
        Command::TrainEval => commands::train_eval(ctx),
        Command::LearningCurve => commands::learning_curve(ctx),
        Command::SelectDataset => commands::select_dataset(ctx),
        Command::ShotStudy => commands::shot_study(ctx),
        Command::GridSearch => commands::grid_search(ctx),
        Command::Calibrate => commands::calibrate(ctx),
        Command::SelectQubits => commands::select_qubits(ctx),
    }
}

fn configure_threads(threads: Option<usize>) -> anyhow::Result<qksvm::Execution> {
    match threads {
        Some(0) => Err(config_error("--threads must be at least 1")),
        Some(1) => Ok(qksvm::Execution::Sequential),
        #[cfg(feature = "parallel")]
        Some(n) => {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
            Ok(qksvm::Execution::Parallel)
        }
        #[cfg(not(feature = "parallel"))]
        Some(_) => {
            log::warn!("built without the parallel feature; --threads is ignored");
            Ok(qksvm::Execution::Sequential)
        }
        None => Ok(qksvm::Execution::default()),
    }
}

fn is_config_error(err: &anyhow::Error) -> bool {
    err.chain().any(|e| e.downcast_ref::<ConfigError>().is_some() || matches!(e.downcast_ref::<qksvm::Error>(), Some(qksvm::Error::InvalidConfig(_))))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(if is_config_error(&err) { 2 } else { 1 })
        }
    }
}
