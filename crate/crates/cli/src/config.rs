//! Experiment configuration: one JSON file, every field optional.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qksvm::experiments::AnsatzSpec;
use qksvm::kernel::{DiagonalMode, Shots};
use qksvm::preprocess::ScalingMode;
use qksvm::svm::{default_c_grid, Penalty};

/// A problem with the configuration or the files it references (exit code 2).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: PathBuf,
    /// Featurized CSV; a synthetic dataset is generated when absent.
    pub dataset: Option<PathBuf>,
    /// Column metadata JSON (`{"log_columns": [...]}`).
    pub column_meta: Option<PathBuf>,
    pub synthetic: SyntheticConfig,
    pub take_abs: bool,
    pub scaling: ScalingMode,
    pub ansatz: AnsatzSpec,
    pub contract: bool,
    pub shots: Shots,
    pub diagonal: DiagonalMode,
    pub readout: Option<ReadoutConfig>,
    pub penalty: Penalty,
    pub c_grid: Vec<f64>,
    pub split: SplitConfig,
    /// Which kernel files `train-eval` reads; defaults to the noisiest available.
    pub kernel_variant: Option<String>,
    pub kernel_dir: Option<PathBuf>,
    pub learning_curve: LearningCurveSection,
    pub select_dataset: SelectDatasetSection,
    pub shot_study: ShotStudySection,
    pub grid_search: GridSearchSection,
    pub calibrate: CalibrateSection,
    pub select_qubits: SelectQubitsSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            dataset: None,
            column_meta: None,
            synthetic: SyntheticConfig::default(),
            take_abs: true,
            scaling: ScalingMode::Global,
            ansatz: AnsatzSpec::Type2 { n_qubits: 10, c1: 0.1 },
            contract: true,
            shots: Shots::Finite(5000),
            diagonal: DiagonalMode::Sampled,
            readout: None,
            penalty: Penalty::L1,
            c_grid: default_c_grid(),
            split: SplitConfig::default(),
            kernel_variant: None,
            kernel_dir: None,
            learning_curve: LearningCurveSection::default(),
            select_dataset: SelectDatasetSection::default(),
            shot_study: ShotStudySection::default(),
            grid_search: GridSearchSection::default(),
            calibrate: CalibrateSection::default(),
            select_qubits: SelectQubitsSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub rows: usize,
    /// Defaults to the qubit count for Type 1 and 67 for Type 2.
    pub dim: Option<usize>,
    pub class_sep: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self { rows: 200, dim: None, class_sep: 3.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutConfig {
    /// Rates JSON; Sycamore-like rates are drawn from the seed when absent.
    #[serde(default)]
    pub rates: Option<PathBuf>,
    pub k_max: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub m: usize,
    pub v: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { m: 60, v: 20 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningCurveSection {
    pub sizes: Vec<usize>,
    pub trials: usize,
    #[serde(rename = "C")]
    pub c: f64,
    /// RBF width; `1 / (d · Var(X))` of the training pool when absent.
    pub gamma: Option<f64>,
}

impl Default for LearningCurveSection {
    fn default() -> Self {
        Self { sizes: vec![10, 20, 40, 60], trials: 10, c: 1.0, gamma: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectDatasetSection {
    /// Rows of the precomputed kernel.
    pub pool: usize,
    pub subset: usize,
    pub folds: usize,
    pub trials: usize,
    #[serde(rename = "C")]
    pub c: f64,
}

impl Default for SelectDatasetSection {
    fn default() -> Self {
        Self { pool: 200, subset: 56, folds: 4, trials: 25, c: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShotStudySection {
    pub shots: Vec<Shots>,
    pub trials: usize,
    pub folds: usize,
    #[serde(rename = "C")]
    pub c: f64,
}

impl Default for ShotStudySection {
    fn default() -> Self {
        let shots = vec![Shots::Finite(100), Shots::Finite(500), Shots::Finite(5000), Shots::Finite(50_000), Shots::Infinite];
        Self { shots, trials: 10, folds: 10, c: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSearchSection {
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
    pub folds: usize,
    #[serde(rename = "C")]
    pub c: f64,
    pub feasibility_threshold: f64,
}

impl Default for GridSearchSection {
    fn default() -> Self {
        let grid = vec![0.1, 0.15, 0.2, 0.25, 0.3];
        Self { c1: grid.clone(), c2: grid, folds: 5, c: 1.0, feasibility_threshold: 1e-2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateSection {
    /// Rates of the simulated channel; Sycamore-like when absent.
    pub true_rates: Option<PathBuf>,
    pub n_qubits: Option<usize>,
    pub pairs: usize,
    pub shots: u64,
    /// Size of the correction study run with the estimated rates.
    pub study_circuits: usize,
    pub study_shots: u64,
    pub perturbation: f64,
    pub k_max: Vec<usize>,
}

impl Default for CalibrateSection {
    fn default() -> Self {
        Self { true_rates: None, n_qubits: None, pairs: 20, shots: 100_000, study_circuits: 40, study_shots: 5000, perturbation: 0.05, k_max: vec![1, 2, 3] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectQubitsSection {
    pub graph: PathBuf,
    pub k: usize,
    /// Per-metric score configuration JSON; defaults when absent.
    pub weights: Option<PathBuf>,
}

impl Default for SelectQubitsSection {
    fn default() -> Self {
        Self { graph: PathBuf::from("data/sycamore23.json"), k: 17, weights: None }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path).map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_slice(&bytes).map_err(|e| config_error(format!("invalid config {}: {e}", path.display())))?;
        Ok((cfg, bytes))
    }

    /// Checks values shared by every subcommand.
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.ansatz.n_qubits() == 0 || self.ansatz.n_qubits() > qksvm::simulator::MAX_QUBITS {
            return Err(config_error(format!("n_qubits = {} is out of range", self.ansatz.n_qubits())));
        }
        if !self.ansatz.c1().is_finite() {
            return Err(config_error("ansatz c1 must be finite"));
        }
        if self.c_grid.is_empty() || self.c_grid.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(config_error("c_grid must be nonempty with positive entries"));
        }
        if self.shots == Shots::Finite(0) {
            return Err(config_error("shots must be positive"));
        }
        for (name, path) in [("dataset", &self.dataset), ("column_meta", &self.column_meta)] {
            if let Some(p) = path {
                if !p.is_file() {
                    return Err(config_error(format!("{name} file {} does not exist", p.display())));
                }
            }
        }
        if let Some(ReadoutConfig { rates: Some(p), .. }) = &self.readout {
            if !p.is_file() {
                return Err(config_error(format!("readout rates file {} does not exist", p.display())));
            }
        }
        if matches!(&self.readout, Some(r) if r.k_max == 0) {
            return Err(config_error("readout k_max must be at least 1"));
        }
        Ok(())
    }
}
