//! Dense statevector simulation.
//!
//! Qubit 0 is the leftmost character of a bitstring label and the most
//! significant bit of a basis index: in an `n`-qubit register, qubit `q`
//! owns bit `n - 1 - q`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest register the dense simulator accepts.
pub const MAX_QUBITS: usize = 26;

const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    H(usize),
    /// `diag(e^{-iθ/2}, e^{iθ/2})`
    Rz(usize, f64),
    /// `[[cos θ/2, -sin θ/2], [sin θ/2, cos θ/2]]`
    Ry(usize, f64),
    /// Principal square root of iSWAP; central block `[[1, i], [i, 1]] / √2`.
    SqrtISwap(usize, usize),
    SqrtISwapDag(usize, usize),
    /// Multiplies basis amplitude `b` by `exp(i·phases[b])`. Acts on the whole register.
    DiagonalPhase(Arc<[f64]>),
}

pub type Circuit = Vec<Gate>;

impl Gate {
    pub fn adjoint(&self) -> Gate {
        match self {
            Gate::H(q) => Gate::H(*q),
            Gate::Rz(q, t) => Gate::Rz(*q, -t),
            Gate::Ry(q, t) => Gate::Ry(*q, -t),
            Gate::SqrtISwap(a, b) => Gate::SqrtISwapDag(*a, *b),
            Gate::SqrtISwapDag(a, b) => Gate::SqrtISwap(*a, *b),
            Gate::DiagonalPhase(p) => Gate::DiagonalPhase(p.iter().map(|x| -x).collect()),
        }
    }

    /// True when `self · other` is the identity by construction.
    pub fn is_inverse_of(&self, other: &Gate) -> bool {
        match (self, other) {
            (Gate::DiagonalPhase(p), Gate::DiagonalPhase(r)) => p.len() == r.len() && p.iter().zip(r.iter()).all(|(a, b)| *a == -*b),
            _ => self.adjoint() == *other,
        }
    }

    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::H(q) | Gate::Rz(q, _) | Gate::Ry(q, _) => vec![*q],
            Gate::SqrtISwap(a, b) | Gate::SqrtISwapDag(a, b) => vec![*a, *b],
            Gate::DiagonalPhase(_) => Vec::new(),
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        for q in self.qubits() {
            if q >= n_qubits {
                return Err(Error::QubitOutOfRange { index: q, n_qubits });
            }
        }
        match self {
            Gate::Rz(_, t) | Gate::Ry(_, t) if !t.is_finite() => Err(Error::NonFiniteAngle(*t)),
            Gate::SqrtISwap(a, b) | Gate::SqrtISwapDag(a, b) if a == b => Err(Error::DuplicateTarget(*a)),
            Gate::DiagonalPhase(p) => {
                let dim = 1usize << n_qubits;
                if p.len() != dim {
                    return Err(Error::PhaseLength { expected: dim, got: p.len() });
                }
                match p.iter().find(|x| !x.is_finite()) {
                    Some(x) => Err(Error::NonFiniteAngle(*x)),
                    None => Ok(()),
                }
            }
            _ => Ok(()),
        }
    }

    /// Dense matrix of the gate on its own targets, row-major.
    ///
    /// Two-qubit gates use the basis `|t0 t1⟩` with the first listed target
    /// as the high bit. A diagonal phase returns its full `2^n × 2^n` matrix.
    pub fn matrix(&self) -> Vec<Vec<Complex64>> {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let z = c(0.0, 0.0);
        let one = c(1.0, 0.0);
        match self {
            Gate::H(_) => vec![vec![c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)], vec![c(FRAC_1_SQRT_2, 0.0), c(-FRAC_1_SQRT_2, 0.0)]],
            Gate::Rz(_, t) => vec![vec![Complex64::from_polar(1.0, -t / 2.0), z], vec![z, Complex64::from_polar(1.0, t / 2.0)]],
            Gate::Ry(_, t) => {
                let (s, co) = (t / 2.0).sin_cos();
                vec![vec![c(co, 0.0), c(-s, 0.0)], vec![c(s, 0.0), c(co, 0.0)]]
            }
            Gate::SqrtISwap(..) | Gate::SqrtISwapDag(..) => {
                let sign = if matches!(self, Gate::SqrtISwap(..)) { 1.0 } else { -1.0 };
                let d = c(FRAC_1_SQRT_2, 0.0);
                let o = c(0.0, sign * FRAC_1_SQRT_2);
                vec![vec![one, z, z, z], vec![z, d, o, z], vec![z, o, d, z], vec![z, z, z, one]]
            }
            Gate::DiagonalPhase(p) => {
                let dim = p.len();
                (0..dim).map(|r| (0..dim).map(|col| if r == col { Complex64::from_polar(1.0, p[r]) } else { z }).collect()).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::EmptyRegister);
        }
        if n_qubits > MAX_QUBITS {
            return Err(Error::RegisterTooLarge(n_qubits));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amplitudes })
    }

    /// Wraps raw amplitudes; the vector must have power-of-two length and unit norm.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("amplitude count {len} is not 2^n with n >= 1")));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Unnormalized(norm));
        }
        Ok(Self { n_qubits: len.trailing_zeros() as usize, amplitudes })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch { expected: self.n_qubits, got: other.n_qubits });
        }
        Ok(self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum())
    }

    /// `|⟨self|other⟩|²`
    pub fn overlap(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        match gate {
            Gate::H(q) => {
                let h = FRAC_1_SQRT_2;
                self.apply_single(*q, |a, b| ((a + b) * h, (a - b) * h));
            }
            Gate::Rz(q, t) => {
                let lo = Complex64::from_polar(1.0, -t / 2.0);
                let hi = Complex64::from_polar(1.0, t / 2.0);
                self.apply_single(*q, |a, b| (a * lo, b * hi));
            }
            Gate::Ry(q, t) => {
                let (s, c) = (t / 2.0).sin_cos();
                self.apply_single(*q, |a, b| (a * c - b * s, a * s + b * c));
            }
            Gate::SqrtISwap(a, b) => self.apply_sqrt_iswap(*a, *b, 1.0),
            Gate::SqrtISwapDag(a, b) => self.apply_sqrt_iswap(*a, *b, -1.0),
            Gate::DiagonalPhase(p) => {
                for (amp, phase) in self.amplitudes.iter_mut().zip(p.iter()) {
                    *amp *= Complex64::from_polar(1.0, *phase);
                }
            }
        }
        Ok(())
    }

    fn mask(&self, q: usize) -> usize {
        1 << (self.n_qubits - 1 - q)
    }

    fn apply_single<F>(&mut self, q: usize, f: F)
    where
        F: Fn(Complex64, Complex64) -> (Complex64, Complex64),
    {
        let mask = self.mask(q);
        let dim = self.amplitudes.len();
        let mut block = 0;
        while block < dim {
            for i in block..block + mask {
                let j = i | mask;
                let (x, y) = f(self.amplitudes[i], self.amplitudes[j]);
                self.amplitudes[i] = x;
                self.amplitudes[j] = y;
            }
            block += 2 * mask;
        }
    }

    fn apply_sqrt_iswap(&mut self, a: usize, b: usize, sign: f64) {
        let (ma, mb) = (self.mask(a), self.mask(b));
        let d = FRAC_1_SQRT_2;
        let o = Complex64::new(0.0, sign * FRAC_1_SQRT_2);
        for i in 0..self.amplitudes.len() {
            // i has a = 0, b = 1; partner has a = 1, b = 0
            if i & ma == 0 && i & mb != 0 {
                let j = (i | ma) & !mb;
                let (x, y) = (self.amplitudes[i], self.amplitudes[j]);
                self.amplitudes[i] = x * d + y * o;
                self.amplitudes[j] = x * o + y * d;
            }
        }
    }

    /// Probability of measuring every qubit as 0.
    pub fn zero_string_probability(&self) -> f64 {
        self.amplitudes[0].norm_sqr()
    }

    pub fn probability_distribution(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Applies `gate` to `state`, returning the new state.
pub fn apply_gate(mut state: StateVector, gate: &Gate) -> Result<StateVector> {
    state.apply(gate)?;
    Ok(state)
}

/// Returns `U|0…0⟩` where the first gate in `circuit` acts first.
pub fn run_circuit(circuit: &[Gate], n_qubits: usize) -> Result<StateVector> {
    for g in circuit {
        g.validate(n_qubits)?;
    }
    let mut state = StateVector::zero(n_qubits)?;
    for g in circuit {
        state.apply(g)?;
    }
    Ok(state)
}

/// Renders basis index `index` as a bitstring, qubit 0 first.
pub fn bitstring(index: usize, n_qubits: usize) -> String {
    (0..n_qubits).map(|q| if index >> (n_qubits - 1 - q) & 1 == 1 { '1' } else { '0' }).collect()
}

/// Parses a bitstring label (qubit 0 first) into a basis index.
pub fn parse_bitstring(s: &str) -> Result<usize> {
    if s.is_empty() || s.len() > MAX_QUBITS {
        return Err(Error::Format(format!("bad bitstring length in {s:?}")));
    }
    s.chars().try_fold(0usize, |acc, ch| match ch {
        '0' => Ok(acc << 1),
        '1' => Ok(acc << 1 | 1),
        _ => Err(Error::Format(format!("bad bitstring {s:?}"))),
    })
}
