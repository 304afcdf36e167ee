//! Experiment drivers shared by the command line and the acceptance tests.
//!
//! Each driver takes precomputed kernels or prepared data plus a small config
//! struct, and returns plain rows ready for CSV or JSON output. All
//! randomness flows from explicit seeds.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::encoders::{Ansatz, Type1Config, Type2Config};
use crate::error::{Error, Result};
use crate::exec::{map_indices, Execution};
use crate::kernel::{exact_kernel_matrix, resample_kernel, KernelEvaluator, KernelMatrix, Shots};
use crate::preprocess::{scale_split, stratified_downsample, train_test_split, Dataset, RobustScaler, ScalingMode};
use crate::readout::{sample_channel, BitflipRates, TruncatedCorrector};
use crate::rng::stream;
use crate::svm::{self, fit_and_score, fold_assignment, loocv_select_c, CScore, FoldScore, Penalty, TrainOptions};

/// Serializable description of an encoding circuit family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum AnsatzSpec {
    Type1 {
        n_qubits: usize,
        c1: f64,
        #[serde(default)]
        c2: f64,
        /// Entangling pairs; a linear chain when absent.
        #[serde(default)]
        edges: Option<Vec<(usize, usize)>>,
    },
    Type2 {
        n_qubits: usize,
        c1: f64,
    },
}

impl AnsatzSpec {
    pub fn n_qubits(&self) -> usize {
        match self {
            AnsatzSpec::Type1 { n_qubits, .. } | AnsatzSpec::Type2 { n_qubits, .. } => *n_qubits,
        }
    }

    pub fn c1(&self) -> f64 {
        match self {
            AnsatzSpec::Type1 { c1, .. } | AnsatzSpec::Type2 { c1, .. } => *c1,
        }
    }

    /// Same family with new constants; `c2` is ignored for Type 2.
    pub fn with_constants(&self, c1: f64, c2: f64) -> Self {
        match self {
            AnsatzSpec::Type1 { n_qubits, edges, .. } => AnsatzSpec::Type1 { n_qubits: *n_qubits, c1, c2, edges: edges.clone() },
            AnsatzSpec::Type2 { n_qubits, .. } => AnsatzSpec::Type2 { n_qubits: *n_qubits, c1 },
        }
    }

    /// Concrete ansatz for inputs of dimension `data_dim`.
    pub fn build(&self, data_dim: usize) -> Result<Ansatz> {
        match self {
            AnsatzSpec::Type1 { n_qubits, c1, c2, edges } => {
                if data_dim != *n_qubits {
                    return Err(Error::InvalidConfig(format!("type 1 needs one feature per qubit: {data_dim} features for {n_qubits} qubits")));
                }
                let mut cfg = Type1Config::chain(*n_qubits, *c1, *c2);
                if let Some(e) = edges {
                    cfg.nn_edges = e.clone();
                }
                // surfaces graph errors before any kernel work
                cfg.build(&vec![0.0; data_dim])?;
                Ok(Ansatz::Type1(cfg))
            }
            AnsatzSpec::Type2 { n_qubits, c1 } => Ok(Ansatz::Type2(Type2Config::new(*n_qubits, data_dim, *c1)?)),
        }
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Derives a child seed for `(seed, keys…)`.
pub fn child_seed(seed: u64, keys: &[u64]) -> u64 {
    stream(seed, keys).next_u64()
}

/// FNV-1a over little-endian indices, as 16 hex digits.
pub fn index_hash<'a>(sets: impl IntoIterator<Item = &'a [usize]>) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for set in sets {
        for &i in set.iter().chain(std::iter::once(&usize::MAX)) {
            for byte in (i as u64).to_le_bytes() {
                h ^= u64::from(byte);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
    }
    format!("{h:016x}")
}

/// Balanced train/test split of a dataset, log-transformed and scaled.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSplit {
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub x_train: Vec<Vec<f64>>,
    pub x_test: Vec<Vec<f64>>,
    pub y_train: Vec<i8>,
    pub y_test: Vec<i8>,
    pub scaler: RobustScaler,
}

pub fn prepare_split(ds: &Dataset, m: usize, v: usize, seed: u64, mode: ScalingMode, take_abs: bool) -> Result<PreparedSplit> {
    let (train_idx, test_idx) = train_test_split(&ds.labels, m, v, seed)?;
    let scaled = scale_split(ds, &train_idx, &test_idx, mode, take_abs)?;
    let labels = |idx: &[usize]| idx.iter().map(|&i| ds.labels[i]).collect();
    Ok(PreparedSplit {
        y_train: labels(&train_idx),
        y_test: labels(&test_idx),
        train_idx,
        test_idx,
        x_train: scaled.train,
        x_test: scaled.test,
        scaler: scaled.scaler,
    })
}

/// Model selection by leave-one-out over a `C` grid, then a final fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedEvaluation {
    #[serde(rename = "C_opt")]
    pub c_opt: f64,
    pub penalty: Penalty,
    pub loocv: Vec<CScore>,
    pub constraint_dropped: bool,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub n_support: usize,
    pub support_fraction: f64,
    pub n_train: usize,
    pub n_test: usize,
}

pub fn train_eval(
    k_train: &KernelMatrix,
    y_train: &[i8],
    k_test: &KernelMatrix,
    y_test: &[i8],
    grid: &[f64],
    opts: &TrainOptions,
) -> Result<TrainedEvaluation> {
    if k_test.cols() != k_train.rows() {
        return Err(Error::DimensionMismatch { expected: k_train.rows(), got: k_test.cols() });
    }
    if k_test.rows() != y_test.len() {
        return Err(Error::DimensionMismatch { expected: k_test.rows(), got: y_test.len() });
    }
    let selection = loocv_select_c(k_train, y_train, grid, opts)?;
    let model = svm::train_with(k_train, y_train, selection.c_opt, opts)?;
    Ok(TrainedEvaluation {
        c_opt: selection.c_opt,
        penalty: opts.penalty,
        loocv: selection.scores,
        constraint_dropped: selection.constraint_dropped,
        train_accuracy: svm::accuracy(&model.predict(k_train)?, y_train),
        test_accuracy: svm::accuracy(&model.predict(k_test)?, y_test),
        n_support: model.support_indices.len(),
        support_fraction: model.support_fraction(),
        n_train: y_train.len(),
        n_test: y_test.len(),
    })
}

/// Readout-correction study on simulated kernel circuits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutStudyConfig {
    pub n_qubits: usize,
    pub circuits: usize,
    pub shots: u64,
    /// Relative standard deviation of the Gaussian noise on each frequency.
    pub perturbation: f64,
    pub k_max: Vec<usize>,
    pub seed: u64,
}

impl Default for ReadoutStudyConfig {
    fn default() -> Self {
        Self { n_qubits: 10, circuits: 40, shots: 5000, perturbation: 0.05, k_max: vec![1, 2], seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutStudyRow {
    pub circuit: usize,
    pub exact: f64,
    pub raw: f64,
    /// One entry per `k_max`, in config order.
    pub corrected: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutStudy {
    pub k_max: Vec<usize>,
    pub rows: Vec<ReadoutStudyRow>,
    pub mean_abs_error_raw: f64,
    pub mean_abs_error_corrected: Vec<f64>,
}

/// Per-qubit rates drawn uniformly from `q10 ∈ [0.01, 0.03]`, `q01 ∈ [0.03, 0.08]`.
pub fn sycamore_like_rates(n_qubits: usize, seed: u64) -> Result<BitflipRates> {
    let mut rng = stream(seed, &[0x7174]);
    let q10 = (0..n_qubits).map(|_| rng.random_range(0.01..=0.03)).collect();
    let q01 = (0..n_qubits).map(|_| rng.random_range(0.03..=0.08)).collect();
    BitflipRates::new(q10, q01)
}

/// Samples Type 2 kernel circuits through the readout channel, perturbs the
/// observed frequencies with multiplicative Gaussian noise, and compares
/// the raw and corrected all-zeros estimates with the exact value.
/// `correction` may differ from `channel` to model calibration error.
///
/// Circuit pairs `(x, z)` are drawn with `z` a random perturbation of `x`,
/// which spreads the exact kernel values over `(0, 1]`.
pub fn readout_correction_study(cfg: &ReadoutStudyConfig, channel: &BitflipRates, correction: &BitflipRates, exec: Execution) -> Result<ReadoutStudy> {
    for rates in [channel, correction] {
        if rates.n_qubits() != cfg.n_qubits {
            return Err(Error::DimensionMismatch { expected: cfg.n_qubits, got: rates.n_qubits() });
        }
    }
    if cfg.perturbation.is_nan() || cfg.perturbation < 0.0 {
        return Err(Error::InvalidConfig(format!("perturbation {} must be nonnegative", cfg.perturbation)));
    }
    let correctors = cfg.k_max.iter().map(|&k| TruncatedCorrector::new(correction, k)).collect::<Result<Vec<_>>>()?;
    let dim = 3 * cfg.n_qubits;
    let evaluator = KernelEvaluator::new(Ansatz::Type2(Type2Config::new(cfg.n_qubits, dim, 1.0)?)).with_execution(Execution::Sequential);
    let rows = map_indices(cfg.circuits, exec, |c| {
        let mut rng = stream(cfg.seed, &[0x726f, c as u64]);
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2)).collect();
        let spread: f64 = rng.random_range(0.0..0.6);
        let z: Vec<f64> = x
            .iter()
            .map(|v| {
                let e: f64 = StandardNormal.sample(&mut rng);
                v + spread * e
            })
            .collect();
        let dist = evaluator.output_state(&x, &z)?.probability_distribution();
        let exact = dist[0];
        let sample = sample_channel(&dist, channel, cfg.shots, &mut rng)?;
        let r = cfg.shots as f64;
        let mut freqs: Vec<(usize, f64)> = sample
            .counts()
            .iter()
            .map(|(&b, &n)| {
                let e: f64 = StandardNormal.sample(&mut rng);
                (b, (n as f64 / r * (1.0 + cfg.perturbation * e)).max(0.0))
            })
            .collect();
        let total: f64 = freqs.iter().map(|f| f.1).sum();
        if total > 0.0 {
            freqs.iter_mut().for_each(|f| f.1 /= total);
        }
        let raw = freqs.iter().find(|f| f.0 == 0).map_or(0.0, |f| f.1);
        let corrected = correctors.iter().map(|corr| corr.correct_zero(freqs.iter().copied()).value).collect();
        Ok(ReadoutStudyRow { circuit: c, exact, raw, corrected })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let n = rows.len().max(1) as f64;
    let mean_abs_error_raw = rows.iter().map(|r| (r.raw - r.exact).abs()).sum::<f64>() / n;
    let mean_abs_error_corrected = (0..cfg.k_max.len()).map(|k| rows.iter().map(|r| (r.corrected[k] - r.exact).abs()).sum::<f64>() / n).collect();
    Ok(ReadoutStudy { k_max: cfg.k_max.clone(), rows, mean_abs_error_raw, mean_abs_error_corrected })
}

/// Precomputed kernels for one method: `train` over the training pool,
/// `test` with test rows against pool columns.
#[derive(Debug, Clone, Copy)]
pub struct KernelPair<'a> {
    pub name: &'a str,
    pub train: &'a KernelMatrix,
    pub test: &'a KernelMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurveConfig {
    pub sizes: Vec<usize>,
    pub trials: usize,
    #[serde(rename = "C")]
    pub c: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurveRow {
    pub size: usize,
    pub kernel: String,
    pub train_mean: f64,
    pub train_std: f64,
    pub test_mean: f64,
    pub test_std: f64,
    /// Hash of the subsets drawn at this size; equal across kernels.
    pub subset_hash: String,
}

/// Train/test accuracy against training-set size, averaged over stratified
/// downsampling trials. Every kernel sees the same subsets.
pub fn learning_curve(
    kernels: &[KernelPair<'_>],
    y_pool: &[i8],
    y_test: &[i8],
    cfg: &LearningCurveConfig,
    opts: &TrainOptions,
) -> Result<Vec<LearningCurveRow>> {
    if cfg.trials == 0 {
        return Err(Error::InvalidConfig("learning curve needs at least one trial".into()));
    }
    for kp in kernels {
        if kp.train.rows() != y_pool.len() || !kp.train.is_square() {
            return Err(Error::DimensionMismatch { expected: y_pool.len(), got: kp.train.rows() });
        }
        if kp.test.rows() != y_test.len() || kp.test.cols() != y_pool.len() {
            return Err(Error::DimensionMismatch { expected: y_pool.len(), got: kp.test.cols() });
        }
    }
    let all_test: Vec<usize> = (0..y_test.len()).collect();
    let mut rows = Vec::new();
    for &size in &cfg.sizes {
        if size > y_pool.len() {
            return Err(Error::InvalidConfig(format!("size {size} exceeds the {} training rows", y_pool.len())));
        }
        let subsets =
            (0..cfg.trials).map(|t| stratified_downsample(y_pool, size, child_seed(cfg.seed, &[size as u64, t as u64]))).collect::<Result<Vec<_>>>()?;
        let hash = index_hash(subsets.iter().map(Vec::as_slice));
        for kp in kernels {
            let scores = map_indices(subsets.len(), opts.execution, |t| {
                let idx = &subsets[t];
                let y_sub: Vec<i8> = idx.iter().map(|&i| y_pool[i]).collect();
                let k_sub = kp.train.select(idx, idx);
                let model = svm::train(&k_sub, &y_sub, cfg.c, opts.penalty)?;
                let train = svm::accuracy(&model.predict(&k_sub)?, &y_sub);
                let test = svm::accuracy(&model.predict(&kp.test.select(&all_test, idx))?, y_test);
                Ok((train, test))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let (train_mean, train_std) = mean_std(&scores.iter().map(|s| s.0).collect::<Vec<_>>());
            let (test_mean, test_std) = mean_std(&scores.iter().map(|s| s.1).collect::<Vec<_>>());
            rows.push(LearningCurveRow { size, kernel: kp.name.to_string(), train_mean, train_std, test_mean, test_std, subset_hash: hash.clone() });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectDatasetConfig {
    pub subset: usize,
    pub folds: usize,
    pub trials: usize,
    #[serde(rename = "C")]
    pub c: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub trial: usize,
    pub fold: usize,
    pub validation: f64,
}

/// The fold whose validation accuracy is closest to the grand mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSelection {
    pub trial: usize,
    pub fold: usize,
    pub accuracy: f64,
    pub grand_mean: f64,
    /// Row indices into the full kernel.
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub records: Vec<FoldRecord>,
}

/// Repeated stratified k-fold CV on balanced subsets of a precomputed kernel.
pub fn select_dataset(k_full: &KernelMatrix, y: &[i8], cfg: &SelectDatasetConfig, opts: &TrainOptions) -> Result<DatasetSelection> {
    if !k_full.is_square() || k_full.rows() != y.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), got: k_full.rows() });
    }
    if cfg.subset > y.len() {
        return Err(Error::InvalidConfig(format!("subset {} is larger than the {}-row kernel", cfg.subset, y.len())));
    }
    if cfg.trials == 0 {
        return Err(Error::InvalidConfig("dataset selection needs at least one trial".into()));
    }
    let mut splits = Vec::new();
    for t in 0..cfg.trials {
        let subset = stratified_downsample(y, cfg.subset, child_seed(cfg.seed, &[0x7364, t as u64]))?;
        let y_sub: Vec<i8> = subset.iter().map(|&i| y[i]).collect();
        let folds = fold_assignment(&y_sub, cfg.folds, true, child_seed(cfg.seed, &[0x6664, t as u64]))?;
        for (f, val_local) in folds.iter().enumerate() {
            let validation: Vec<usize> = val_local.iter().map(|&i| subset[i]).collect();
            let train: Vec<usize> = subset.iter().copied().filter(|i| !validation.contains(i)).collect();
            splits.push((t, f, train, validation));
        }
    }
    let scores = map_indices(splits.len(), opts.execution, |s| {
        let (_, _, train, val) = &splits[s];
        fit_and_score(k_full, y, train, val, cfg.c, &TrainOptions { execution: Execution::Sequential, ..*opts })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let records: Vec<FoldRecord> = splits.iter().zip(&scores).map(|((t, f, _, _), s)| FoldRecord { trial: *t, fold: *f, validation: s.validation }).collect();
    let grand_mean = records.iter().map(|r| r.validation).sum::<f64>() / records.len() as f64;
    let mut best = 0;
    for (i, r) in records.iter().enumerate() {
        if (r.validation - grand_mean).abs() < (records[best].validation - grand_mean).abs() {
            best = i;
        }
    }
    let (trial, fold, train, validation) = splits.swap_remove(best);
    Ok(DatasetSelection { trial, fold, accuracy: records[best].validation, grand_mean, train, validation, records })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotStudyConfig {
    pub shots: Vec<Shots>,
    pub trials: usize,
    pub folds: usize,
    #[serde(rename = "C")]
    pub c: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotStudyRow {
    pub shots: Shots,
    pub train_mean: f64,
    pub train_std: f64,
    pub validation_mean: f64,
    pub validation_std: f64,
}

/// Stratified k-fold CV on binomial resamplings of an exact kernel.
///
/// Folds are fixed by the seed and shared by every `R` and trial, so the
/// spread across trials is due to shot noise alone.
pub fn shot_study(k_exact: &KernelMatrix, y: &[i8], cfg: &ShotStudyConfig, opts: &TrainOptions) -> Result<Vec<ShotStudyRow>> {
    if !k_exact.is_square() || k_exact.rows() != y.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), got: k_exact.rows() });
    }
    if cfg.trials == 0 {
        return Err(Error::InvalidConfig("shot study needs at least one trial".into()));
    }
    let folds = fold_assignment(y, cfg.folds, true, cfg.seed)?;
    let m = y.len();
    cfg.shots
        .iter()
        .map(|&shots| {
            let key = match shots {
                Shots::Finite(r) => r,
                Shots::Infinite => u64::MAX,
            };
            let per_trial = (0..cfg.trials)
                .map(|t| {
                    let k = resample_kernel(k_exact, shots, child_seed(cfg.seed, &[key]), t as u64, opts.execution)?;
                    let fold_scores = map_indices(folds.len(), opts.execution, |f| {
                        let val = &folds[f];
                        let train: Vec<usize> = (0..m).filter(|i| !val.contains(i)).collect();
                        fit_and_score(&k, y, &train, val, cfg.c, opts)
                    })
                    .into_iter()
                    .collect::<Result<Vec<FoldScore>>>()?;
                    let n = fold_scores.len() as f64;
                    Ok((fold_scores.iter().map(|s| s.train).sum::<f64>() / n, fold_scores.iter().map(|s| s.validation).sum::<f64>() / n))
                })
                .collect::<Result<Vec<_>>>()?;
            let (train_mean, train_std) = mean_std(&per_trial.iter().map(|s| s.0).collect::<Vec<_>>());
            let (validation_mean, validation_std) = mean_std(&per_trial.iter().map(|s| s.1).collect::<Vec<_>>());
            Ok(ShotStudyRow { shots, train_mean, train_std, validation_mean, validation_std })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchConfig {
    pub c1: Vec<f64>,
    /// Ignored for Type 2.
    #[serde(default)]
    pub c2: Vec<f64>,
    pub folds: usize,
    #[serde(rename = "C")]
    pub c: f64,
    pub seed: u64,
    pub feasibility_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub c1: f64,
    pub c2: Option<f64>,
    pub median_kernel: f64,
    pub cv_train: f64,
    pub cv_validation: f64,
    /// Median kernel at or above the sampling-feasibility threshold.
    pub feasible: bool,
}

/// Median off-diagonal exact kernel and k-fold CV accuracy per grid point.
pub fn grid_search(points: &[Vec<f64>], y: &[i8], base: &AnsatzSpec, cfg: &GridSearchConfig, opts: &TrainOptions, exec: Execution) -> Result<Vec<GridPoint>> {
    if cfg.c1.is_empty() {
        return Err(Error::InvalidConfig("empty c1 grid".into()));
    }
    let dim = points.first().map_or(0, Vec::len);
    let c2_grid: Vec<Option<f64>> = match base {
        AnsatzSpec::Type1 { .. } if !cfg.c2.is_empty() => cfg.c2.iter().map(|&c| Some(c)).collect(),
        AnsatzSpec::Type1 { c2, .. } => vec![Some(*c2)],
        AnsatzSpec::Type2 { .. } => vec![None],
    };
    let folds = fold_assignment(y, cfg.folds, true, cfg.seed)?;
    let m = y.len();
    let mut out = Vec::new();
    for &c1 in &cfg.c1 {
        for &c2 in &c2_grid {
            let ansatz = base.with_constants(c1, c2.unwrap_or(0.0)).build(dim)?;
            let k = exact_kernel_matrix(points, None, &KernelEvaluator::new(ansatz).with_execution(exec))?;
            let median_kernel = k.median_off_diagonal().unwrap_or(1.0);
            let scores = folds
                .iter()
                .map(|val| {
                    let train: Vec<usize> = (0..m).filter(|i| !val.contains(i)).collect();
                    fit_and_score(&k, y, &train, val, cfg.c, opts)
                })
                .collect::<Result<Vec<_>>>()?;
            let n = scores.len() as f64;
            out.push(GridPoint {
                c1,
                c2,
                median_kernel,
                cv_train: scores.iter().map(|s| s.train).sum::<f64>() / n,
                cv_validation: scores.iter().map(|s| s.validation).sum::<f64>() / n,
                feasible: median_kernel >= cfg.feasibility_threshold,
            });
        }
    }
    Ok(out)
}

/// Feasible grid point with the best validation score; ties go to the
/// earlier point.
pub fn tuned_point(points: &[GridPoint]) -> Option<&GridPoint> {
    points.iter().filter(|p| p.feasible).fold(None, |best: Option<&GridPoint>, p| match best {
        Some(b) if b.cv_validation >= p.cv_validation => Some(b),
        _ => Some(p),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_population() {
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 1.0));
        assert_eq!(mean_std(&[5.0; 4]), (5.0, 0.0));
    }

    #[test]
    fn index_hash_distinguishes_split_points() {
        let a = index_hash([&[1usize, 2][..], &[3][..]]);
        let b = index_hash([&[1usize][..], &[2, 3][..]]);
        assert_ne!(a, b);
        assert_eq!(a, index_hash([&[1usize, 2][..], &[3][..]]));
    }

    #[test]
    fn ansatz_spec_json() {
        let spec: AnsatzSpec = serde_json::from_str(r#"{"type":"type2","n_qubits":4,"c1":0.2}"#).unwrap();
        assert_eq!(spec, AnsatzSpec::Type2 { n_qubits: 4, c1: 0.2 });
        assert_eq!(spec.build(10).unwrap().n_qubits(), 4);
        let spec: AnsatzSpec = serde_json::from_str(r#"{"type":"type1","n_qubits":3,"c1":0.2}"#).unwrap();
        assert!(spec.build(4).is_err());
        assert_eq!(spec.build(3).unwrap().input_dim(), 3);
        let broken = AnsatzSpec::Type1 { n_qubits: 3, c1: 0.2, c2: 0.1, edges: Some(vec![(0, 1)]) };
        assert!(broken.build(3).is_err());
    }

    #[test]
    fn rates_in_range() {
        let r = sycamore_like_rates(10, 4).unwrap();
        assert!(r.q10().iter().all(|q| (0.01..=0.03).contains(q)));
        assert!(r.q01().iter().all(|q| (0.03..=0.08).contains(q)));
    }

    #[test]
    fn tuned_point_prefers_feasible() {
        let p = |c1, v, feasible| GridPoint { c1, c2: None, median_kernel: 0.5, cv_train: 1.0, cv_validation: v, feasible };
        let pts = [p(0.1, 0.8, true), p(0.2, 0.9, false), p(0.3, 0.8, true)];
        assert_eq!(tuned_point(&pts).unwrap().c1, 0.1);
        assert!(tuned_point(&[p(0.1, 0.8, false)]).is_none());
    }
}
