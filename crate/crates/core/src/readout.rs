//! Independent per-qubit readout bitflips: channel simulation, truncated
//! response-matrix correction, analytic bounds and rate estimation.
//!
//! Response matrices follow the column convention: entry `(y, x)` is the
//! probability of observing `y` when `x` was prepared, so columns of the full
//! matrix sum to one.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::ShotSample;
use crate::simulator::{parse_bitstring, MAX_QUBITS};

/// Upper clamp for estimated rates; rates must stay below 1/2.
pub const MAX_ESTIMATED_RATE: f64 = 0.4999;

const DIST_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct BitflipRates {
    q10: Vec<f64>,
    q01: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RateEntry {
    q10: f64,
    q01: f64,
}

#[derive(Serialize, Deserialize)]
struct RatesFile {
    qubits: Vec<RateEntry>,
}

impl BitflipRates {
    /// `q10[k]` is `q^k(1|0)`, `q01[k]` is `q^k(0|1)`.
    pub fn new(q10: Vec<f64>, q01: Vec<f64>) -> Result<Self> {
        if q10.len() != q01.len() {
            return Err(Error::DimensionMismatch { expected: q10.len(), got: q01.len() });
        }
        if q10.is_empty() || q10.len() > MAX_QUBITS {
            return Err(Error::InvalidArgument(format!("rates for {} qubits", q10.len())));
        }
        if let Some(r) = q10.iter().chain(&q01).find(|r| !(0.0..0.5).contains(*r)) {
            return Err(Error::InvalidArgument(format!("flip rate {r} outside [0, 0.5)")));
        }
        Ok(Self { q10, q01 })
    }

    pub fn uniform(n_qubits: usize, q10: f64, q01: f64) -> Result<Self> {
        Self::new(vec![q10; n_qubits], vec![q01; n_qubits])
    }

    pub fn noiseless(n_qubits: usize) -> Self {
        Self { q10: vec![0.0; n_qubits], q01: vec![0.0; n_qubits] }
    }

    pub fn n_qubits(&self) -> usize {
        self.q10.len()
    }

    pub fn q10(&self) -> &[f64] {
        &self.q10
    }

    pub fn q01(&self) -> &[f64] {
        &self.q01
    }

    /// `q^k(y|x)` for single bits.
    pub fn single(&self, k: usize, y: bool, x: bool) -> f64 {
        match (x, y) {
            (false, false) => 1.0 - self.q10[k],
            (false, true) => self.q10[k],
            (true, false) => self.q01[k],
            (true, true) => 1.0 - self.q01[k],
        }
    }

    /// Probability that qubit `k` prepared as `x` is read flipped.
    pub fn flip_probability(&self, k: usize, x: bool) -> f64 {
        if x {
            self.q01[k]
        } else {
            self.q10[k]
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = RatesFile { qubits: self.q10.iter().zip(&self.q01).map(|(&q10, &q01)| RateEntry { q10, q01 }).collect() };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: RatesFile = serde_json::from_str(text)?;
        let (q10, q01) = file.qubits.iter().map(|e| (e.q10, e.q01)).unzip();
        Self::new(q10, q01)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}

fn bit(index: usize, k: usize, n: usize) -> bool {
    index >> (n - 1 - k) & 1 == 1
}

/// `p(y|x) = Π_k q^k(y_k|x_k)` for basis indices of an `n`-qubit register.
pub fn transition_probability_index(x: usize, y: usize, rates: &BitflipRates) -> f64 {
    let n = rates.n_qubits();
    (0..n).map(|k| rates.single(k, bit(y, k, n), bit(x, k, n))).product()
}

/// `p(y|x)` for bitstring labels (qubit 0 first).
pub fn transition_probability(x: &str, y: &str, rates: &BitflipRates) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if x.len() != rates.n_qubits() {
        return Err(Error::DimensionMismatch { expected: rates.n_qubits(), got: x.len() });
    }
    Ok(transition_probability_index(parse_bitstring(x)?, parse_bitstring(y)?, rates))
}

fn check_distribution(dist: &[f64], rates: &BitflipRates) -> Result<()> {
    let expected = 1usize << rates.n_qubits();
    if dist.len() != expected {
        return Err(Error::DimensionMismatch { expected, got: dist.len() });
    }
    let sum: f64 = dist.iter().sum();
    if (sum - 1.0).abs() > DIST_TOL || dist.iter().any(|p| *p < -DIST_TOL) {
        return Err(Error::Unnormalized(sum));
    }
    Ok(())
}

/// Observed distribution after the full tensor-product channel, applied one
/// qubit at a time in `O(n 2^n)`.
pub fn apply_channel_exact(dist: &[f64], rates: &BitflipRates) -> Result<Vec<f64>> {
    check_distribution(dist, rates)?;
    let n = rates.n_qubits();
    let mut out = dist.to_vec();
    for k in 0..n {
        let mask = 1usize << (n - 1 - k);
        let (q10, q01) = (rates.q10[k], rates.q01[k]);
        for i in (0..out.len()).filter(|i| i & mask == 0) {
            let (p0, p1) = (out[i], out[i | mask]);
            out[i] = (1.0 - q10) * p0 + q01 * p1;
            out[i | mask] = q10 * p0 + (1.0 - q01) * p1;
        }
    }
    Ok(out)
}

/// Draws `shots` bitstrings from `dist` and flips every bit independently.
pub fn sample_channel<R: Rng + ?Sized>(dist: &[f64], rates: &BitflipRates, shots: u64, rng: &mut R) -> Result<ShotSample> {
    check_distribution(dist, rates)?;
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    let n = rates.n_qubits();
    let cumulative: Vec<f64> = dist
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p.max(0.0);
            Some(*acc)
        })
        .collect();
    let total = *cumulative.last().unwrap_or(&1.0);
    let mut counts = BTreeMap::new();
    for _ in 0..shots {
        let u = rng.random::<f64>() * total;
        let prepared = cumulative.partition_point(|c| *c <= u).min(dist.len() - 1);
        let mut observed = prepared;
        for k in 0..n {
            if rng.random::<f64>() < rates.flip_probability(k, bit(prepared, k, n)) {
                observed ^= 1 << (n - 1 - k);
            }
        }
        *counts.entry(observed).or_insert(0) += 1;
    }
    ShotSample::new(n, shots, counts)
}

/// Flips each bit of an already-sampled histogram.
pub fn flip_sample<R: Rng + ?Sized>(sample: &ShotSample, rates: &BitflipRates, rng: &mut R) -> Result<ShotSample> {
    let n = rates.n_qubits();
    if sample.n_qubits() != n {
        return Err(Error::DimensionMismatch { expected: n, got: sample.n_qubits() });
    }
    let mut counts = BTreeMap::new();
    for (&prepared, &c) in sample.counts() {
        for _ in 0..c {
            let mut observed = prepared;
            for k in 0..n {
                if rng.random::<f64>() < rates.flip_probability(k, bit(prepared, k, n)) {
                    observed ^= 1 << (n - 1 - k);
                }
            }
            *counts.entry(observed).or_insert(0) += 1;
        }
    }
    ShotSample::new(n, sample.shots(), counts)
}

/// All basis indices with Hamming weight `<= k_max`, ordered by weight and
/// then lexicographically by bitstring label.
pub fn hamming_basis(n_qubits: usize, k_max: usize) -> Vec<usize> {
    let mut basis = Vec::new();
    for w in 0..=k_max.min(n_qubits) {
        let mut level = Vec::new();
        combinations(n_qubits, w, 0, 0, &mut level);
        level.sort_unstable();
        basis.extend(level);
    }
    basis
}

fn combinations(n: usize, remaining: usize, start: usize, acc: usize, out: &mut Vec<usize>) {
    if remaining == 0 {
        out.push(acc);
        return;
    }
    for k in start..=n - remaining {
        combinations(n, remaining - 1, k + 1, acc | 1 << (n - 1 - k), out);
    }
}

#[derive(Debug, Clone)]
pub struct TruncatedResponse {
    pub n_qubits: usize,
    pub k_max: usize,
    pub basis: Vec<usize>,
    /// Entry `(r, c)` is `p(basis[r] | basis[c])`.
    pub matrix: DMatrix<f64>,
}

impl TruncatedResponse {
    pub fn new(rates: &BitflipRates, k_max: usize) -> Result<Self> {
        let n = rates.n_qubits();
        if k_max > n {
            return Err(Error::InvalidArgument(format!("k_max {k_max} exceeds {n} qubits")));
        }
        let basis = hamming_basis(n, k_max);
        let d = basis.len();
        let matrix = DMatrix::from_fn(d, d, |r, c| transition_probability_index(basis[c], basis[r], rates));
        Ok(Self { n_qubits: n, k_max, basis, matrix })
    }

    /// Moore–Penrose pseudo-inverse with singular values below
    /// `1e-12 · σ_max` discarded.
    pub fn pseudo_inverse(&self) -> Result<DMatrix<f64>> {
        pseudo_inverse(&self.matrix, 1e-12)
    }
}

/// SVD-based pseudo-inverse with relative singular-value cutoff.
pub fn pseudo_inverse(m: &DMatrix<f64>, rel_cutoff: f64) -> Result<DMatrix<f64>> {
    let svd = m.clone().svd(true, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    svd.pseudo_inverse(rel_cutoff * sigma_max).map_err(|e| Error::InvalidArgument(format!("pseudo-inverse failed: {e}")))
}

/// Result of correcting one all-zeros frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correction {
    pub value: f64,
    /// Unclamped estimate.
    pub raw: f64,
    pub clamped: bool,
}

/// Precomputed truncated correction for a fixed set of rates.
///
/// Only the all-zeros row of the pseudo-inverse is needed to recover `K̂`.
#[derive(Debug, Clone)]
pub struct TruncatedCorrector {
    response: TruncatedResponse,
    pinv: DMatrix<f64>,
    position: BTreeMap<usize, usize>,
}

impl TruncatedCorrector {
    pub fn new(rates: &BitflipRates, k_max: usize) -> Result<Self> {
        if k_max == 0 {
            return Err(Error::InvalidArgument("k_max must be at least 1".into()));
        }
        let response = TruncatedResponse::new(rates, k_max)?;
        let pinv = response.pseudo_inverse()?;
        let position = response.basis.iter().enumerate().map(|(i, &b)| (b, i)).collect();
        Ok(Self { response, pinv, position })
    }

    pub fn response(&self) -> &TruncatedResponse {
        &self.response
    }

    fn frequency_vector(&self, freqs: impl IntoIterator<Item = (usize, f64)>) -> Vec<f64> {
        let mut v = vec![0.0; self.response.basis.len()];
        for (b, f) in freqs {
            if let Some(&i) = self.position.get(&b) {
                v[i] += f;
            }
        }
        v
    }

    /// Corrected truncated distribution (not clamped), in basis order.
    pub fn correct_frequencies(&self, freqs: impl IntoIterator<Item = (usize, f64)>) -> Vec<f64> {
        let v = nalgebra::DVector::from_vec(self.frequency_vector(freqs));
        (&self.pinv * v).iter().copied().collect()
    }

    /// Corrected all-zeros probability from observed frequencies keyed by basis
    /// index. Strings outside the truncated basis are ignored.
    pub fn correct_zero(&self, freqs: impl IntoIterator<Item = (usize, f64)>) -> Correction {
        let v = self.frequency_vector(freqs);
        let raw: f64 = self.pinv.row(0).iter().zip(&v).map(|(a, b)| a * b).sum();
        let value = raw.clamp(0.0, 1.0);
        Correction { value, raw, clamped: value != raw }
    }

    pub fn correct_sample(&self, sample: &ShotSample) -> Correction {
        let r = sample.shots() as f64;
        self.correct_zero(sample.counts().iter().map(|(b, c)| (*b, *c as f64 / r)))
    }
}

/// Corrected all-zeros probability from truncated frequencies keyed by bitstring label.
pub fn corrected_zero_probability(truncated: &BTreeMap<String, f64>, rates: &BitflipRates, k_max: usize) -> Result<f64> {
    let n = rates.n_qubits();
    let mut freqs = BTreeMap::new();
    for (label, f) in truncated {
        if label.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: label.len() });
        }
        let b = parse_bitstring(label)?;
        if b.count_ones() as usize > k_max {
            return Err(Error::InvalidArgument(format!("{label} exceeds weight {k_max}")));
        }
        freqs.insert(b, *f);
    }
    let corrector = TruncatedCorrector::new(rates, k_max)?;
    Ok(corrector.correct_zero(freqs).value)
}

/// Infinite-shot bounds on the observed all-zeros probability given the
/// noiseless value `k_hat`.
pub fn readout_bounds(k_hat: f64, rates: &BitflipRates) -> (f64, f64) {
    let survive: f64 = rates.q10.iter().map(|q| 1.0 - q).product();
    let max_q01 = rates.q01.iter().cloned().fold(0.0, f64::max);
    (k_hat * survive, (1.0 - k_hat) * max_q01 + k_hat)
}

/// `Pr(Z > k_max)` where `Z` counts flipped bits when reading out basis state `x`.
pub fn truncation_tail_probability(rates: &BitflipRates, k_max: usize, x: usize) -> f64 {
    let n = rates.n_qubits();
    // Poisson-binomial pmf by dynamic programming
    let mut pmf = vec![0.0; n + 1];
    pmf[0] = 1.0;
    for k in 0..n {
        let p = rates.flip_probability(k, bit(x, k, n));
        for z in (0..=k + 1).rev() {
            let stay = pmf[z] * (1.0 - p);
            let moved = if z > 0 { pmf[z - 1] * p } else { 0.0 };
            pmf[z] = stay + moved;
        }
    }
    if k_max >= n {
        return 0.0;
    }
    pmf[k_max + 1..].iter().sum()
}

/// Per-qubit flip rates from calibration runs.
///
/// Each entry pairs a prepared basis state with its observed shots. For every
/// qubit, flip frequencies are computed per preparation and averaged over
/// all preparations of that bit value.
pub fn estimate_rates_from_experiments(prepared: &[(usize, ShotSample)]) -> Result<BitflipRates> {
    let n = match prepared.first() {
        Some((_, s)) => s.n_qubits(),
        None => return Err(Error::InvalidArgument("no calibration runs".into())),
    };
    let mut sums = vec![[0.0f64; 2]; n];
    let mut runs = vec![[0usize; 2]; n];
    for (state, sample) in prepared {
        if sample.n_qubits() != n {
            return Err(Error::DimensionMismatch { expected: n, got: sample.n_qubits() });
        }
        let r = sample.shots() as f64;
        for k in 0..n {
            let x = bit(*state, k, n);
            let flipped: u64 = sample.counts().iter().filter(|(obs, _)| bit(**obs, k, n) != x).map(|(_, c)| *c).sum();
            sums[k][x as usize] += flipped as f64 / r;
            runs[k][x as usize] += 1;
        }
    }
    let mut q10 = Vec::with_capacity(n);
    let mut q01 = Vec::with_capacity(n);
    for k in 0..n {
        if runs[k][0] == 0 || runs[k][1] == 0 {
            return Err(Error::Coverage(k));
        }
        q10.push((sums[k][0] / runs[k][0] as f64).clamp(0.0, MAX_ESTIMATED_RATE));
        q01.push((sums[k][1] / runs[k][1] as f64).clamp(0.0, MAX_ESTIMATED_RATE));
    }
    BitflipRates::new(q10, q01)
}

/// Random bitstrings each followed by its complement.
pub fn complement_preparations<R: Rng + ?Sized>(n_qubits: usize, pairs: usize, rng: &mut R) -> Vec<usize> {
    let full = (1usize << n_qubits) - 1;
    (0..pairs)
        .flat_map(|_| {
            let s = rng.random_range(0..=full);
            [s, s ^ full]
        })
        .collect()
}

/// Simulates the complement-pair calibration protocol through a channel.
pub fn simulate_calibration<R: Rng + ?Sized>(rates: &BitflipRates, pairs: usize, shots: u64, rng: &mut R) -> Result<Vec<(usize, ShotSample)>> {
    let n = rates.n_qubits();
    complement_preparations(n, pairs, rng)
        .into_iter()
        .map(|s| {
            let mut dist = vec![0.0; 1 << n];
            dist[s] = 1.0;
            Ok((s, sample_channel(&dist, rates, shots, rng)?))
        })
        .collect()
}
