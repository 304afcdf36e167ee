//! Binary SVM on precomputed kernels.
//!
//! The dual is solved by SMO-style pairwise coordinate ascent with
//! second-order working-pair selection. The L1 (hinge) penalty uses the box
//! `0 ≤ α ≤ C`; the L2 (squared hinge) penalty trains on `K + I/C` with only
//! `α ≥ 0`.

use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indices, Execution};
use crate::kernel::{KernelKind, KernelMatrix, Shots};
use crate::rng::stream;

/// Curvature floor for non-positive pair curvature (indefinite kernels).
const TAU: f64 = 1e-12;
/// Multipliers beyond `ALPHA_BLOWUP · max(C, 1)` mean an unbounded L2 dual.
const ALPHA_BLOWUP: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    L1,
    #[default]
    L2,
}

impl fmt::Display for Penalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Penalty::L1 => "l1",
            Penalty::L2 => "l2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop when the maximal KKT violation falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tolerance: 1e-5, max_iterations: 1_000_000 }
    }
}

/// Training configuration shared by single fits and cross validation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrainOptions {
    pub penalty: Penalty,
    pub solver: SolverOptions,
    /// Scheduling for independent fits inside cross validation.
    pub execution: Execution,
}

impl TrainOptions {
    pub fn new(penalty: Penalty) -> Self {
        Self { penalty, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub support_indices: Vec<usize>,
    pub labels: Vec<i8>,
    #[serde(rename = "C")]
    pub c: f64,
    pub penalty: Penalty,
    #[serde(default)]
    pub iterations: usize,
}

fn validate_labels(y: &[i8]) -> Result<()> {
    if let Some(v) = y.iter().find(|v| **v != 1 && **v != -1) {
        return Err(Error::InvalidArgument(format!("label {v} is not ±1")));
    }
    if y.iter().all(|v| *v == y[0]) {
        return Err(Error::SingleClass);
    }
    Ok(())
}

/// Trains with default solver settings.
pub fn train(k: &KernelMatrix, y: &[i8], c: f64, penalty: Penalty) -> Result<SvmModel> {
    train_with(k, y, c, &TrainOptions::new(penalty))
}

pub fn train_with(k: &KernelMatrix, y: &[i8], c: f64, opts: &TrainOptions) -> Result<SvmModel> {
    if !k.is_square() {
        return Err(Error::InvalidArgument(format!("kernel is {}×{}, expected square", k.rows(), k.cols())));
    }
    let m = k.rows();
    if y.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: y.len() });
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("penalty C = {c} must be positive")));
    }
    validate_labels(y)?;

    let (upper, ridge) = match opts.penalty {
        Penalty::L1 => (c, 0.0),
        Penalty::L2 => (f64::INFINITY, 1.0 / c),
    };
    let ys: Vec<f64> = y.iter().map(|v| f64::from(*v)).collect();
    // Q_ij = y_i y_j (K_ij + ridge δ_ij)
    let q: Vec<f64> = (0..m * m)
        .map(|idx| {
            let (i, j) = (idx / m, idx % m);
            let kij = k.get(i, j) + if i == j { ridge } else { 0.0 };
            ys[i] * ys[j] * kij
        })
        .collect();
    let mut alpha = vec![0.0; m];
    let mut grad = vec![-1.0; m];
    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < upper) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < upper);

    let mut iterations = 0;
    loop {
        // working pair: i maximises −y G over I_up, j by second-order gain over I_low
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..m {
            if in_up(alpha[t], ys[t]) && -ys[t] * grad[t] > gmax {
                gmax = -ys[t] * grad[t];
                i_sel = Some(t);
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best_gain = f64::INFINITY;
        if let Some(i) = i_sel {
            for t in 0..m {
                if !in_low(alpha[t], ys[t]) {
                    continue;
                }
                let v = ys[t] * grad[t];
                gmax2 = gmax2.max(v);
                let diff = gmax + v;
                if diff > 0.0 {
                    let curv = q[i * m + i] + q[t * m + t] - 2.0 * ys[i] * ys[t] * q[i * m + t];
                    let gain = -diff * diff / if curv > 0.0 { curv } else { TAU };
                    if gain < best_gain {
                        best_gain = gain;
                        j_sel = Some(t);
                    }
                }
            }
        }
        let violation = gmax + gmax2;
        let (i, j) = match (i_sel, j_sel) {
            (Some(i), Some(j)) if violation >= opts.solver.tolerance => (i, j),
            _ => break,
        };
        if iterations >= opts.solver.max_iterations {
            return Err(Error::NotConverged { iterations, violation });
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (qii, qjj, qij) = (q[i * m + i], q[j * m + j], q[i * m + j]);
        if ys[i] != ys[j] {
            let raw_curv = qii + qjj + 2.0 * qij;
            if raw_curv <= 0.0 && upper.is_infinite() {
                // both multipliers can grow without limit along this pair
                return Err(Error::Unbounded { iterations });
            }
            let curv = raw_curv.max(TAU);
            let delta = (-grad[i] - grad[j]) / curv;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if upper.is_finite() {
                if diff > 0.0 {
                    if alpha[i] > upper {
                        alpha[i] = upper;
                        alpha[j] = upper - diff;
                    }
                } else if alpha[j] > upper {
                    alpha[j] = upper;
                    alpha[i] = upper + diff;
                }
            }
        } else {
            let curv = (qii + qjj - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / curv;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > upper {
                if alpha[i] > upper {
                    alpha[i] = upper;
                    alpha[j] = sum - upper;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > upper {
                if alpha[j] > upper {
                    alpha[j] = upper;
                    alpha[i] = sum - upper;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        if upper.is_infinite() && alpha[i].max(alpha[j]) > ALPHA_BLOWUP * c.max(1.0) {
            return Err(Error::Unbounded { iterations });
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..m {
            grad[t] += q[i * m + t] * di + q[j * m + t] * dj;
        }
    }

    let bias = compute_bias(&alpha, &grad, &ys, upper);
    let tol = 1e-8 * c;
    let support_indices = (0..m).filter(|&t| alpha[t] > tol).collect();
    Ok(SvmModel { alphas: alpha, bias, support_indices, labels: y.to_vec(), c, penalty: opts.penalty, iterations })
}

/// Mean of `y_s − Σ α_i y_i K̃_is` over free support vectors, or the
/// midpoint of the KKT-feasible interval when none are free.
fn compute_bias(alpha: &[f64], grad: &[f64], ys: &[f64], upper: f64) -> f64 {
    let mut free_sum = 0.0;
    let mut free = 0usize;
    let mut lb = f64::NEG_INFINITY;
    let mut ub = f64::INFINITY;
    for t in 0..alpha.len() {
        let v = -ys[t] * grad[t];
        let at_lower = alpha[t] <= 0.0;
        let at_upper = alpha[t] >= upper;
        if !at_lower && !at_upper {
            free_sum += v;
            free += 1;
        } else if (at_lower && ys[t] > 0.0) || (at_upper && ys[t] < 0.0) {
            lb = lb.max(v);
        } else {
            ub = ub.min(v);
        }
    }
    if free > 0 {
        free_sum / free as f64
    } else {
        match (lb.is_finite(), ub.is_finite()) {
            (true, true) => 0.5 * (lb + ub),
            (true, false) => lb,
            (false, true) => ub,
            (false, false) => 0.0,
        }
    }
}

impl SvmModel {
    pub fn n_train(&self) -> usize {
        self.alphas.len()
    }

    /// Fraction of training points that are support vectors.
    pub fn support_fraction(&self) -> f64 {
        self.support_indices.len() as f64 / self.alphas.len() as f64
    }

    /// Decision values `Σ_s α_s y_s K_eval[j, s] + b` for each row of `k_eval`.
    pub fn decision_function(&self, k_eval: &KernelMatrix) -> Result<Vec<f64>> {
        if k_eval.cols() != self.n_train() {
            return Err(Error::DimensionMismatch { expected: self.n_train(), got: k_eval.cols() });
        }
        Ok((0..k_eval.rows())
            .map(|j| {
                let row = k_eval.row(j);
                self.support_indices.iter().map(|&s| self.alphas[s] * f64::from(self.labels[s]) * row[s]).sum::<f64>() + self.bias
            })
            .collect())
    }

    /// Sign of the decision function; zero maps to `+1`.
    pub fn predict(&self, k_eval: &KernelMatrix) -> Result<Vec<i8>> {
        Ok(self.decision_function(k_eval)?.into_iter().map(|f| if f >= 0.0 { 1 } else { -1 }).collect())
    }

    /// `Σα − ½ Σ α_i α_j y_i y_j K̃_ij` on the training kernel.
    pub fn dual_objective(&self, k: &KernelMatrix) -> f64 {
        dual_objective(k, &self.labels, &self.alphas, self.penalty, self.c)
    }

    /// Largest `|y_s f(x_s) − 1|` over free support vectors, with the
    /// L2 slack `α_s / C` folded into the margin.
    pub fn kkt_violation(&self, k: &KernelMatrix) -> Result<f64> {
        let f = self.decision_function(k)?;
        let upper = match self.penalty {
            Penalty::L1 => self.c,
            Penalty::L2 => f64::INFINITY,
        };
        Ok((0..self.n_train())
            .filter(|&s| self.alphas[s] > 0.0 && self.alphas[s] < upper)
            .map(|s| {
                let slack = if self.penalty == Penalty::L2 { self.alphas[s] / self.c } else { 0.0 };
                (f64::from(self.labels[s]) * f[s] - 1.0 + slack).abs()
            })
            .fold(0.0, f64::max))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn dual_objective(k: &KernelMatrix, y: &[i8], alpha: &[f64], penalty: Penalty, c: f64) -> f64 {
    let m = alpha.len();
    let ridge = if penalty == Penalty::L2 { 1.0 / c } else { 0.0 };
    let mut quad = 0.0;
    for i in 0..m {
        let ai = alpha[i] * f64::from(y[i]);
        if ai == 0.0 {
            continue;
        }
        for j in 0..m {
            let kij = k.get(i, j) + if i == j { ridge } else { 0.0 };
            quad += ai * alpha[j] * f64::from(y[j]) * kij;
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

pub fn accuracy(predicted: &[i8], y: &[i8]) -> f64 {
    let hits = predicted.iter().zip(y).filter(|(a, b)| a == b).count();
    hits as f64 / y.len() as f64
}

/// Train and validation accuracy of one split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub train: f64,
    pub validation: f64,
}

/// Fits on `train_idx` and scores both index sets. A single-class training
/// subset degrades to predicting that class.
pub fn fit_and_score(k: &KernelMatrix, y: &[i8], train_idx: &[usize], val_idx: &[usize], c: f64, opts: &TrainOptions) -> Result<FoldScore> {
    let y_train: Vec<i8> = train_idx.iter().map(|&i| y[i]).collect();
    let y_val: Vec<i8> = val_idx.iter().map(|&i| y[i]).collect();
    if y_train.iter().all(|v| *v == y_train[0]) {
        let constant = |ys: &[i8]| accuracy(&vec![y_train[0]; ys.len()], ys);
        return Ok(FoldScore { train: constant(&y_train), validation: constant(&y_val) });
    }
    let model = train_with(&k.select(train_idx, train_idx), &y_train, c, opts)?;
    let train_pred = model.predict(&k.select(train_idx, train_idx))?;
    let val_pred = model.predict(&k.select(val_idx, train_idx))?;
    Ok(FoldScore { train: accuracy(&train_pred, &y_train), validation: accuracy(&val_pred, &y_val) })
}

fn mean(v: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = v.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// Cross-validation summary for one value of `C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CScore {
    #[serde(rename = "C")]
    pub c: f64,
    pub train: f64,
    pub validation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CSelection {
    #[serde(rename = "C_opt")]
    pub c_opt: f64,
    pub scores: Vec<CScore>,
    /// True when every `C` violated validation ≤ train and the rule was dropped.
    pub constraint_dropped: bool,
}

/// Leave-one-out scores for every `C` in `grid`, picking the best mean
/// validation accuracy among values whose validation score does not exceed
/// their training score. Ties go to the smallest `C`. Values of `C` whose
/// L2 dual is unbounded on this kernel are skipped with a warning.
pub fn loocv_select_c(k: &KernelMatrix, y: &[i8], grid: &[f64], opts: &TrainOptions) -> Result<CSelection> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty C grid".into()));
    }
    let m = y.len();
    if m < 3 {
        return Err(Error::InvalidArgument(format!("LOOCV needs at least 3 points, got {m}")));
    }
    if k.rows() != m || !k.is_square() {
        return Err(Error::DimensionMismatch { expected: m, got: k.rows() });
    }
    validate_labels(y)?;
    let folds: Vec<Vec<usize>> = (0..m).map(|i| vec![i]).collect();
    let mut scores = Vec::with_capacity(grid.len());
    for &c in grid {
        match cv_over_folds(k, y, &folds, c, opts) {
            Ok(per_fold) => scores.push(CScore { c, train: mean(per_fold.iter().map(|f| f.train)), validation: mean(per_fold.iter().map(|f| f.validation)) }),
            Err(Error::Unbounded { .. }) => log::warn!("skipping C = {c}: unbounded dual on this kernel"),
            Err(e) => return Err(e),
        }
    }
    if scores.is_empty() {
        return Err(Error::Unbounded { iterations: 0 });
    }
    let pick = |admissible: &dyn Fn(&CScore) -> bool| {
        scores.iter().filter(|s| admissible(s)).fold(None::<CScore>, |best, s| match best {
            Some(b) if b.validation > s.validation || (b.validation == s.validation && b.c <= s.c) => Some(b),
            _ => Some(*s),
        })
    };
    let (chosen, dropped) = match pick(&|s: &CScore| s.validation <= s.train) {
        Some(s) => (s, false),
        None => {
            log::warn!("every C has validation accuracy above training accuracy; ignoring that constraint");
            (pick(&|_| true).expect("scores are nonempty"), true)
        }
    };
    Ok(CSelection { c_opt: chosen.c, scores, constraint_dropped: dropped })
}

fn cv_over_folds(k: &KernelMatrix, y: &[i8], folds: &[Vec<usize>], c: f64, opts: &TrainOptions) -> Result<Vec<FoldScore>> {
    let m = y.len();
    map_indices(folds.len(), opts.execution, |f| {
        let val = &folds[f];
        let mut held = vec![false; m];
        for &i in val {
            held[i] = true;
        }
        let train_idx: Vec<usize> = (0..m).filter(|&i| !held[i]).collect();
        // nested fits stay sequential
        let inner = TrainOptions { execution: Execution::Sequential, ..*opts };
        fit_and_score(k, y, &train_idx, val, c, &inner)
    })
    .into_iter()
    .collect()
}

/// Validation index sets for `k`-fold cross validation, deterministic in `seed`.
///
/// Stratified folds shuffle each class and deal its members round-robin, so
/// every fold holds each class in proportion to within one element.
pub fn fold_assignment(y: &[i8], k: usize, stratified: bool, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    if k > y.len() {
        return Err(Error::InvalidArgument(format!("{k} folds for {} points", y.len())));
    }
    let mut rng = stream(seed, &[0x6b66]);
    let groups: Vec<Vec<usize>> = if stratified {
        [1i8, -1]
            .iter()
            .map(|&label| {
                let members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == label).collect();
                if members.len() < k {
                    return Err(Error::InsufficientClass { label, available: members.len(), required: k });
                }
                Ok(members)
            })
            .collect::<Result<_>>()?
    } else {
        vec![(0..y.len()).collect()]
    };
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for mut g in groups {
        g.shuffle(&mut rng);
        for i in g {
            folds[next % k].push(i);
            next += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Per-fold train/validation accuracy of `k`-fold cross validation at fixed `C`.
pub fn kfold_cv(kernel: &KernelMatrix, y: &[i8], k: usize, stratified: bool, seed: u64, c: f64, opts: &TrainOptions) -> Result<Vec<FoldScore>> {
    if kernel.rows() != y.len() || !kernel.is_square() {
        return Err(Error::DimensionMismatch { expected: y.len(), got: kernel.rows() });
    }
    let folds = fold_assignment(y, k, stratified, seed)?;
    cv_over_folds(kernel, y, &folds, c, opts)
}

/// `exp(−γ ‖x − z‖²)`; unit diagonal when `cols` is absent.
pub fn rbf_kernel(rows: &[Vec<f64>], cols: Option<&[Vec<f64>]>, gamma: f64, exec: Execution) -> Result<KernelMatrix> {
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(Error::InvalidArgument(format!("gamma = {gamma} must be positive")));
    }
    let other = cols.unwrap_or(rows);
    let d = rows.first().map_or(0, Vec::len);
    if let Some(p) = rows.iter().chain(other).find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: p.len() });
    }
    let n_cols = other.len();
    let data = map_indices(rows.len() * n_cols, exec, |idx| {
        let (i, j) = (idx / n_cols, idx % n_cols);
        let dist2: f64 = rows[i].iter().zip(&other[j]).map(|(a, b)| (a - b) * (a - b)).sum();
        (-gamma * dist2).exp()
    });
    KernelMatrix::from_vec(rows.len(), n_cols, data, KernelKind::Exact, Shots::Infinite)
}

/// `1 / (d · Var(X))` over all feature values.
pub fn rbf_gamma_scale(rows: &[Vec<f64>]) -> f64 {
    let values: Vec<f64> = rows.iter().flatten().copied().collect();
    let d = rows.first().map_or(1, Vec::len).max(1) as f64;
    let mu = mean(values.iter().copied());
    let var = mean(values.iter().map(|v| (v - mu) * (v - mu)));
    if var > 0.0 {
        1.0 / (d * var)
    } else {
        1.0 / d
    }
}

/// 13 logarithmically spaced values from `1e-3` to `1e3`.
pub fn default_c_grid() -> Vec<f64> {
    (0..13).map(|i| 10f64.powf(-3.0 + 0.5 * i as f64)).collect()
}
