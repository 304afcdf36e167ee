//! Kernel matrices: exact values from the composed encoding circuit,
//! finite-shot estimates, readout-corrected estimates, and the sampling
//! diagnostics that go with them.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::encoders::{kernel_circuit, Ansatz};
use crate::error::{Error, Result};
use crate::exec::{map_indices, Execution};
use crate::readout::{sample_channel, BitflipRates, TruncatedCorrector};
use crate::rng::stream;
use crate::simulator::{bitstring, parse_bitstring, run_circuit, StateVector};

const BINARY_MAGIC: &[u8; 4] = b"QKM1";

/// Repetitions per circuit; `Infinite` means exact probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shots {
    Finite(u64),
    Infinite,
}

impl fmt::Display for Shots {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shots::Finite(r) => write!(f, "{r}"),
            Shots::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Shots {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Shots::Finite(r) => s.serialize_u64(*r),
            Shots::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Shots {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(0) => Err(de::Error::custom("shot count must be positive")),
            Raw::Num(r) => Ok(Shots::Finite(r)),
            Raw::Text(t) if matches!(t.as_str(), "inf" | "infinite" | "∞") => Ok(Shots::Infinite),
            Raw::Text(t) => t.parse::<u64>().ok().filter(|r| *r > 0).map(Shots::Finite).ok_or_else(|| de::Error::custom(format!("bad shot count {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Exact,
    Sampled,
    Corrected,
}

/// Dense row-major kernel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    pub kind: KernelKind,
    pub shots: Shots,
}

impl KernelMatrix {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>, kind: KernelKind, shots: Shots) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Self { rows, cols, data, kind, shots })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let data = (0..rows * cols).map(|k| f(k / cols, k % cols)).collect();
        Self { rows, cols, data, kind: KernelKind::Exact, shots: Shots::Infinite }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Largest `|K_ij - K_ji|`; infinite for non-square matrices.
    pub fn asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Submatrix with the given row and column indices.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> KernelMatrix {
        let data = rows.iter().flat_map(|&i| cols.iter().map(move |&j| self.get(i, j))).collect();
        KernelMatrix { rows: rows.len(), cols: cols.len(), data, kind: self.kind, shots: self.shots }
    }

    pub fn scaled(&self, r: f64) -> KernelMatrix {
        KernelMatrix { data: self.data.iter().map(|v| v * r).collect(), ..self.clone() }
    }

    /// Off-diagonal entries (all entries for rectangular matrices).
    pub fn off_diagonal(&self) -> Vec<f64> {
        if !self.is_square() {
            return self.data.clone();
        }
        let mut out = Vec::with_capacity(self.rows * self.rows.saturating_sub(1));
        for i in 0..self.rows {
            for j in 0..self.cols {
                if i != j {
                    out.push(self.get(i, j));
                }
            }
        }
        out
    }

    /// Median of the off-diagonal entries, averaging the two middle values
    /// for even counts. `None` for a 1×1 matrix.
    pub fn median_off_diagonal(&self) -> Option<f64> {
        median(self.off_diagonal())
    }

    pub fn mean_diagonal(&self) -> f64 {
        let n = self.rows.min(self.cols);
        (0..n).map(|i| self.get(i, i)).sum::<f64>() / n as f64
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    /// CSV with a header row of column indices; one matrix row per line.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record((0..self.cols).map(|j| j.to_string()))?;
        for i in 0..self.rows {
            out.write_record(self.row(i).iter().map(|v| v.to_string()))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, kind: KernelKind, shots: Shots) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(r);
        let cols = reader.headers()?.len();
        let mut data = Vec::new();
        let mut rows = 0;
        for rec in reader.records() {
            let rec = rec?;
            for field in rec.iter() {
                data.push(field.trim().parse::<f64>().map_err(|e| Error::Format(format!("{field:?}: {e}")))?);
            }
            rows += 1;
        }
        Self::from_vec(rows, cols, data, kind, shots)
    }

    /// Binary layout: `QKM1`, `u32` rows, `u32` cols, row-major `f64`, all little-endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let rows = u32::try_from(self.rows).map_err(|_| Error::Format("too many rows".into()))?;
        let cols = u32::try_from(self.cols).map_err(|_| Error::Format("too many columns".into()))?;
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&rows.to_le_bytes())?;
        w.write_all(&cols.to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R, kind: KernelKind, shots: Shots) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Format("missing QKM1 magic".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let rows = u32::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let cols = u32::from_le_bytes(word) as usize;
        let mut data = Vec::with_capacity(rows * cols);
        let mut buf = [0u8; 8];
        for _ in 0..rows * cols {
            r.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        if r.read(&mut buf)? != 0 {
            return Err(Error::Format("trailing bytes after matrix".into()));
        }
        Self::from_vec(rows, cols, data, kind, shots)
    }

    /// Writes `<stem>.csv` and `<stem>.qkm`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        self.write_csv(std::fs::File::create(dir.join(format!("{stem}.csv")))?)?;
        let mut buf = Vec::with_capacity(12 + 8 * self.data.len());
        self.write_binary(&mut buf)?;
        std::fs::write(dir.join(format!("{stem}.qkm")), buf)?;
        Ok(())
    }
}

pub(crate) fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Histogram of observed basis states over `shots` repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotSample {
    n_qubits: usize,
    shots: u64,
    counts: BTreeMap<usize, u64>,
}

impl ShotSample {
    pub fn new(n_qubits: usize, shots: u64, counts: BTreeMap<usize, u64>) -> Result<Self> {
        if shots == 0 {
            return Err(Error::ZeroShots);
        }
        let total: u64 = counts.values().sum();
        if total != shots {
            return Err(Error::InvalidArgument(format!("counts sum to {total}, expected {shots}")));
        }
        if let Some(b) = counts.keys().find(|b| **b >> n_qubits != 0) {
            return Err(Error::InvalidArgument(format!("basis index {b} outside {n_qubits} qubits")));
        }
        Ok(Self { n_qubits, shots, counts })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn counts(&self) -> &BTreeMap<usize, u64> {
        &self.counts
    }

    pub fn zero_count(&self) -> u64 {
        self.counts.get(&0).copied().unwrap_or(0)
    }

    /// `ν₀ / R`
    pub fn zero_frequency(&self) -> f64 {
        self.zero_count() as f64 / self.shots as f64
    }

    /// Counts restricted to Hamming weight `<= k_max`.
    pub fn truncated(&self, k_max: usize) -> BTreeMap<usize, u64> {
        self.counts.iter().filter(|(b, _)| b.count_ones() as usize <= k_max).map(|(b, c)| (*b, *c)).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct ShotSampleFile {
    shots: u64,
    counts: BTreeMap<String, u64>,
}

impl Serialize for ShotSample {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ShotSampleFile { shots: self.shots, counts: self.counts.iter().map(|(b, c)| (bitstring(*b, self.n_qubits), *c)).collect() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ShotSample {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let file = ShotSampleFile::deserialize(d)?;
        let n = file.counts.keys().next().map(|k| k.len()).unwrap_or(0);
        if file.counts.keys().any(|k| k.len() != n) {
            return Err(de::Error::custom("bitstrings of unequal length"));
        }
        let counts = file.counts.iter().map(|(k, c)| parse_bitstring(k).map(|b| (b, *c))).collect::<Result<_>>().map_err(de::Error::custom)?;
        ShotSample::new(n, file.shots, counts).map_err(de::Error::custom)
    }
}

/// Builds and simulates the composed kernel circuits for one ansatz.
#[derive(Debug, Clone)]
pub struct KernelEvaluator {
    pub ansatz: Ansatz,
    /// Cancel inverse gate pairs at the `U(x_i) · U†(x_j)` boundary.
    pub contract: bool,
    pub execution: Execution,
}

impl KernelEvaluator {
    pub fn new(ansatz: Ansatz) -> Self {
        Self { ansatz, contract: true, execution: Execution::default() }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn with_contraction(mut self, contract: bool) -> Self {
        self.contract = contract;
        self
    }

    /// Output state of `U†(x_j) U(x_i)|0⟩`.
    pub fn output_state(&self, x_i: &[f64], x_j: &[f64]) -> Result<StateVector> {
        let circuit = kernel_circuit(x_i, x_j, &self.ansatz, self.contract)?;
        run_circuit(&circuit, self.ansatz.n_qubits())
    }

    /// `k(x_i, x_j)` as the all-zeros probability of the composed circuit.
    pub fn entry(&self, x_i: &[f64], x_j: &[f64]) -> Result<f64> {
        Ok(self.output_state(x_i, x_j)?.zero_string_probability())
    }

    fn check_points(&self, points: &[Vec<f64>]) -> Result<()> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("empty point list".into()));
        }
        let d = self.ansatz.input_dim();
        match points.iter().find(|p| p.len() != d) {
            Some(p) => Err(Error::DimensionMismatch { expected: d, got: p.len() }),
            None => Ok(()),
        }
    }
}

/// Entry positions to evaluate: the upper triangle (with diagonal) for a
/// square matrix, every entry otherwise.
fn entry_positions(rows: usize, cols: Option<usize>) -> Vec<(usize, usize)> {
    match cols {
        None => (0..rows).flat_map(|i| (i..rows).map(move |j| (i, j))).collect(),
        Some(c) => (0..rows).flat_map(|i| (0..c).map(move |j| (i, j))).collect(),
    }
}

fn assemble(rows: usize, cols: Option<usize>, positions: &[(usize, usize)], values: &[f64]) -> Vec<f64> {
    let c = cols.unwrap_or(rows);
    let mut data = vec![0.0; rows * c];
    for (&(i, j), &v) in positions.iter().zip(values) {
        data[i * c + j] = v;
        if cols.is_none() {
            data[j * c + i] = v;
        }
    }
    data
}

/// Exact kernel matrix.
///
/// Without `cols` the matrix is `k(x_a, x_b)` over `rows`, computed on the
/// upper triangle and mirrored, with unit diagonal. With `cols` the entry
/// `(a, b)` is `k(rows[a], cols[b])`: pass test points as `rows` and training
/// points as `cols` to get the evaluation kernel for [`crate::svm::SvmModel::predict`].
pub fn exact_kernel_matrix(rows: &[Vec<f64>], cols: Option<&[Vec<f64>]>, evaluator: &KernelEvaluator) -> Result<KernelMatrix> {
    evaluator.check_points(rows)?;
    if let Some(c) = cols {
        evaluator.check_points(c)?;
    }
    let positions = entry_positions(rows.len(), cols.map(<[_]>::len));
    let values = map_indices(positions.len(), evaluator.execution, |k| {
        let (i, j) = positions[k];
        match cols {
            None if i == j => Ok(1.0),
            None => evaluator.entry(&rows[i], &rows[j]),
            Some(c) => evaluator.entry(&rows[i], &c[j]),
        }
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let c = cols.map_or(rows.len(), <[_]>::len);
    KernelMatrix::from_vec(rows.len(), c, assemble(rows.len(), cols.map(<[_]>::len), &positions, &values), KernelKind::Exact, Shots::Infinite)
}

/// `K̂ = ν₀ / R` with `ν₀ ~ Binomial(R, p0)`.
pub fn sample_kernel_entry<R: Rng + ?Sized>(p0: f64, shots: u64, rng: &mut R) -> Result<f64> {
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    if !(-1e-9..=1.0 + 1e-9).contains(&p0) {
        return Err(Error::InvalidArgument(format!("probability {p0} outside [0, 1]")));
    }
    let dist = Binomial::new(shots, p0.clamp(0.0, 1.0)).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(dist.sample(rng) as f64 / shots as f64)
}

/// Sample variance of the estimator, `K̂(1 − K̂)/(R − 1)`.
pub fn estimator_variance(k_hat: f64, shots: u64) -> Result<f64> {
    if shots < 2 {
        return Err(Error::InvalidArgument("variance needs at least 2 shots".into()));
    }
    Ok(k_hat * (1.0 - k_hat) / (shots - 1) as f64)
}

/// Chernoff bound `2 exp(−R K ε² / 3)` on `Pr(|K̂ − K| / K ≥ ε)`.
pub fn chernoff_relative_error_bound(k: f64, shots: f64, epsilon: f64) -> Result<f64> {
    if k <= 0.0 || k > 1.0 {
        return Err(Error::InvalidArgument(format!("kernel value {k} outside (0, 1]")));
    }
    if epsilon <= 0.0 || shots < 0.0 {
        return Err(Error::InvalidArgument("epsilon must be positive and shots nonnegative".into()));
    }
    Ok(2.0 * (-shots * k * epsilon * epsilon / 3.0).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagonalMode {
    /// Diagonal entries are estimated like any other entry.
    #[default]
    Sampled,
    /// Diagonal entries are pinned to 1.
    Unit,
}

/// Readout channel applied to every shot, followed by truncated correction.
#[derive(Debug, Clone)]
pub struct ReadoutModel {
    pub rates: BitflipRates,
    pub k_max: usize,
}

#[derive(Debug, Clone)]
pub struct SamplingOptions {
    pub shots: Shots,
    pub seed: u64,
    /// Distinguishes matrices drawn under one seed (e.g. train and test).
    pub stream: u64,
    pub readout: Option<ReadoutModel>,
    pub diagonal: DiagonalMode,
}

impl SamplingOptions {
    pub fn new(shots: Shots, seed: u64) -> Self {
        Self { shots, seed, stream: 0, readout: None, diagonal: DiagonalMode::Sampled }
    }
}

/// Output of [`sampled_kernel_matrix`].
#[derive(Debug, Clone)]
pub struct SampledKernels {
    pub sampled: KernelMatrix,
    /// Present when a readout model was supplied.
    pub corrected: Option<KernelMatrix>,
    /// Corrected entries that fell outside `[0, 1]` before clamping.
    pub clamp_events: usize,
}

/// Finite-shot kernel estimate.
///
/// Square matrices sample the upper triangle (including the diagonal unless
/// [`DiagonalMode::Unit`]) and mirror it; rectangular matrices sample every
/// entry. Entry `(i, j)` draws from its own stream keyed by
/// `(seed, stream, i, j)`, so results are independent of scheduling.
pub fn sampled_kernel_matrix(rows: &[Vec<f64>], cols: Option<&[Vec<f64>]>, evaluator: &KernelEvaluator, opts: &SamplingOptions) -> Result<SampledKernels> {
    let shots = match opts.shots {
        Shots::Infinite => {
            let exact = exact_kernel_matrix(rows, cols, evaluator)?;
            let corrected = opts.readout.as_ref().map(|_| KernelMatrix { kind: KernelKind::Corrected, ..exact.clone() });
            return Ok(SampledKernels { sampled: KernelMatrix { kind: KernelKind::Sampled, ..exact }, corrected, clamp_events: 0 });
        }
        Shots::Finite(r) => r,
    };
    evaluator.check_points(rows)?;
    if let Some(c) = cols {
        evaluator.check_points(c)?;
    }
    let corrector = match &opts.readout {
        Some(m) => {
            if m.rates.n_qubits() != evaluator.ansatz.n_qubits() {
                return Err(Error::DimensionMismatch { expected: evaluator.ansatz.n_qubits(), got: m.rates.n_qubits() });
            }
            Some(TruncatedCorrector::new(&m.rates, m.k_max)?)
        }
        None => None,
    };
    let positions = entry_positions(rows.len(), cols.map(<[_]>::len));
    let results = map_indices(positions.len(), evaluator.execution, |k| -> Result<(f64, Option<(f64, bool)>)> {
        let (i, j) = positions[k];
        let diagonal = cols.is_none() && i == j;
        if diagonal && opts.diagonal == DiagonalMode::Unit {
            return Ok((1.0, corrector.as_ref().map(|_| (1.0, false))));
        }
        let z = match cols {
            Some(c) => &c[j],
            None => &rows[j],
        };
        let mut rng = stream(opts.seed, &[opts.stream, i as u64, j as u64]);
        match (&opts.readout, &corrector) {
            (Some(model), Some(corr)) => {
                let dist = evaluator.output_state(&rows[i], z)?.probability_distribution();
                let sample = sample_channel(&dist, &model.rates, shots, &mut rng)?;
                let c = corr.correct_sample(&sample);
                Ok((sample.zero_frequency(), Some((c.value, c.clamped))))
            }
            _ => {
                let p0 = if diagonal { 1.0 } else { evaluator.entry(&rows[i], z)? };
                Ok((sample_kernel_entry(p0, shots, &mut rng)?, None))
            }
        }
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let c = cols.map_or(rows.len(), <[_]>::len);
    let col_count = cols.map(<[_]>::len);
    let sampled_values: Vec<f64> = results.iter().map(|r| r.0).collect();
    let sampled = KernelMatrix::from_vec(rows.len(), c, assemble(rows.len(), col_count, &positions, &sampled_values), KernelKind::Sampled, opts.shots)?;
    let (corrected, clamp_events) = if corrector.is_some() {
        let values: Vec<f64> = results.iter().map(|r| r.1.map_or(0.0, |x| x.0)).collect();
        let clamps = results.iter().filter(|r| r.1.is_some_and(|x| x.1)).count();
        let m = KernelMatrix::from_vec(rows.len(), c, assemble(rows.len(), col_count, &positions, &values), KernelKind::Corrected, opts.shots)?;
        (Some(m), clamps)
    } else {
        (None, 0)
    };
    Ok(SampledKernels { sampled, corrected, clamp_events })
}

/// Binomial resampling of an exact kernel at `shots` repetitions.
///
/// Square inputs are resampled on the upper triangle and mirrored.
pub fn resample_kernel(exact: &KernelMatrix, shots: Shots, seed: u64, stream_id: u64, exec: Execution) -> Result<KernelMatrix> {
    let r = match shots {
        Shots::Infinite => return Ok(KernelMatrix { kind: KernelKind::Sampled, ..exact.clone() }),
        Shots::Finite(r) => r,
    };
    let square = exact.is_square();
    let cols = if square { None } else { Some(exact.cols()) };
    let positions = entry_positions(exact.rows(), cols);
    let values = map_indices(positions.len(), exec, |k| {
        let (i, j) = positions[k];
        let mut rng = stream(seed, &[stream_id, i as u64, j as u64]);
        sample_kernel_entry(exact.get(i, j), r, &mut rng)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    KernelMatrix::from_vec(exact.rows(), exact.cols(), assemble(exact.rows(), cols, &positions, &values), KernelKind::Sampled, shots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::Type2Config;
    use approx::assert_abs_diff_eq;

    fn points(m: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = stream(seed, &[]);
        (0..m).map(|_| (0..d).map(|_| rng.random_range(-1.5..1.5)).collect()).collect()
    }

    #[test]
    fn degenerate_entries() {
        let mut rng = stream(1, &[]);
        assert_eq!(sample_kernel_entry(1.0, 100, &mut rng).unwrap(), 1.0);
        assert_eq!(sample_kernel_entry(0.0, 100, &mut rng).unwrap(), 0.0);
        assert!(matches!(sample_kernel_entry(0.5, 0, &mut rng), Err(Error::ZeroShots)));
    }

    #[test]
    fn variance_and_bound() {
        assert_eq!(estimator_variance(0.0, 10).unwrap(), 0.0);
        assert_eq!(estimator_variance(1.0, 10).unwrap(), 0.0);
        assert_abs_diff_eq!(estimator_variance(0.5, 5001).unwrap(), 5e-5, epsilon = 1e-18);
        assert!(estimator_variance(0.5, 1).is_err());
        let b = chernoff_relative_error_bound(0.1, 5000.0, 0.1).unwrap();
        assert_abs_diff_eq!(b, 2.0 * (-5.0f64 / 3.0).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(b, 0.378, epsilon = 1e-3);
        assert_eq!(chernoff_relative_error_bound(0.3, 0.0, 0.2).unwrap(), 2.0);
        assert!(chernoff_relative_error_bound(0.0, 10.0, 0.1).is_err());
        let base = chernoff_relative_error_bound(0.2, 100.0, 0.1).unwrap();
        assert!(chernoff_relative_error_bound(0.3, 100.0, 0.1).unwrap() < base);
        assert!(chernoff_relative_error_bound(0.2, 200.0, 0.1).unwrap() < base);
        assert!(chernoff_relative_error_bound(0.2, 100.0, 0.2).unwrap() < base);
    }

    #[test]
    fn binomial_mean() {
        let mut rng = stream(5, &[]);
        let trials = 1000;
        let mean: f64 = (0..trials).map(|_| sample_kernel_entry(0.5, 5000, &mut rng).unwrap()).sum::<f64>() / trials as f64;
        assert!((mean - 0.5).abs() < 3.0 * (0.25f64 / 5000.0).sqrt());
    }

    #[test]
    fn singleton_matrix() {
        let ev = KernelEvaluator::new(Ansatz::Type2(Type2Config::new(2, 3, 1.0).unwrap()));
        let k = exact_kernel_matrix(&[vec![0.1, 0.2, 0.3]], None, &ev).unwrap();
        assert_eq!(k.as_slice(), &[1.0]);
        assert!(k.median_off_diagonal().is_none());
    }

    #[test]
    fn zero_scale_gives_all_ones() {
        let ev = KernelEvaluator::new(Ansatz::Type2(Type2Config::new(3, 5, 0.0).unwrap()));
        let k = exact_kernel_matrix(&points(4, 5, 2), None, &ev).unwrap();
        for v in k.as_slice() {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let ev = KernelEvaluator::new(Ansatz::Type2(Type2Config::new(3, 5, 0.5).unwrap()));
        assert!(matches!(exact_kernel_matrix(&points(3, 4, 1), None, &ev), Err(Error::DimensionMismatch { .. })));
        assert!(exact_kernel_matrix(&[], None, &ev).is_err());
    }

    #[test]
    fn infinite_shots_equal_exact() {
        let ev = KernelEvaluator::new(Ansatz::Type2(Type2Config::new(3, 6, 0.7).unwrap()));
        let x = points(5, 6, 3);
        let exact = exact_kernel_matrix(&x, None, &ev).unwrap();
        let s = sampled_kernel_matrix(&x, None, &ev, &SamplingOptions::new(Shots::Infinite, 1)).unwrap();
        assert_eq!(s.sampled.as_slice(), exact.as_slice());
    }

    #[test]
    fn sampling_is_seeded_and_symmetric() {
        let ev = KernelEvaluator::new(Ansatz::Type2(Type2Config::new(3, 6, 0.7).unwrap()));
        let x = points(6, 6, 4);
        let opts = SamplingOptions::new(Shots::Finite(500), 9);
        let a = sampled_kernel_matrix(&x, None, &ev, &opts).unwrap().sampled;
        let b = sampled_kernel_matrix(&x, None, &ev.clone().with_execution(Execution::Sequential), &opts).unwrap().sampled;
        assert_eq!(a, b);
        assert_eq!(a.asymmetry(), 0.0);
        let c = sampled_kernel_matrix(&x, None, &ev, &SamplingOptions::new(Shots::Finite(500), 10)).unwrap().sampled;
        assert_ne!(a, c);
    }

    #[test]
    fn unit_diagonal_mode() {
        let ev = KernelEvaluator::new(Ansatz::Type2(Type2Config::new(3, 6, 0.7).unwrap()));
        let x = points(4, 6, 4);
        let mut opts = SamplingOptions::new(Shots::Finite(100), 9);
        opts.diagonal = DiagonalMode::Unit;
        opts.readout = Some(ReadoutModel { rates: BitflipRates::uniform(3, 0.05, 0.1).unwrap(), k_max: 2 });
        let s = sampled_kernel_matrix(&x, None, &ev, &opts).unwrap();
        for i in 0..4 {
            assert_eq!(s.sampled.get(i, i), 1.0);
            assert_eq!(s.corrected.as_ref().unwrap().get(i, i), 1.0);
        }
    }

    #[test]
    fn binary_and_csv_round_trip() {
        let k = KernelMatrix::from_fn(3, 2, |i, j| (i as f64 + 0.1) / (j as f64 + 3.0));
        let mut bin = Vec::new();
        k.write_binary(&mut bin).unwrap();
        assert_eq!(&bin[..4], b"QKM1");
        assert_eq!(bin.len(), 12 + 6 * 8);
        assert_eq!(KernelMatrix::read_binary(&bin[..], KernelKind::Exact, Shots::Infinite).unwrap(), k);
        let mut text = Vec::new();
        k.write_csv(&mut text).unwrap();
        assert!(String::from_utf8_lossy(&text).starts_with("0,1\n"));
        assert_eq!(KernelMatrix::read_csv(&text[..], KernelKind::Exact, Shots::Infinite).unwrap(), k);
    }

    #[test]
    fn shot_sample_json() {
        let s = ShotSample::new(3, 10, [(0usize, 7u64), (5, 3)].into_iter().collect()).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(text, r#"{"shots":10,"counts":{"000":7,"101":3}}"#);
        assert_eq!(serde_json::from_str::<ShotSample>(&text).unwrap(), s);
        assert!(ShotSample::new(3, 11, s.counts().clone()).is_err());
    }

    #[test]
    fn shots_parse() {
        assert_eq!(serde_json::from_str::<Shots>("5000").unwrap(), Shots::Finite(5000));
        assert_eq!(serde_json::from_str::<Shots>("\"inf\"").unwrap(), Shots::Infinite);
        assert!(serde_json::from_str::<Shots>("0").is_err());
    }
}
