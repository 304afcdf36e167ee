//! Data-encoding circuits.
//!
//! Two families are provided:
//!
//! * [`Type1Config`]: `U(x) = H^⊗n V(x) H^⊗n V(x)` with `V(x)` diagonal in the
//!   computational basis (single-qubit Z terms plus nearest-neighbour ZZ
//!   terms weighted by `c2 (x_i - x_j)`). Input dimension equals the qubit count.
//! * [`Type2Config`]: `L` blocks, each a layer of `H, RZ, RY, RZ` on every
//!   qubit followed by a chain of √iSWAP entanglers. Input features fill the
//!   rotation slots in order, so any data dimension fits by adding blocks.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::simulator::{Circuit, Gate};

#[derive(Debug, Clone, PartialEq)]
pub struct Type2Config {
    pub n_qubits: usize,
    pub data_dim: usize,
    pub c1: f64,
}

impl Type2Config {
    pub fn new(n_qubits: usize, data_dim: usize, c1: f64) -> Result<Self> {
        let cfg = Self { n_qubits, data_dim, c1 };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.data_dim == 0 {
            return Err(Error::InvalidConfig("type 2 ansatz needs data_dim >= 1".into()));
        }
        if self.n_qubits < 2 {
            return Err(Error::InvalidConfig("type 2 ansatz needs at least 2 qubits".into()));
        }
        if !self.c1.is_finite() {
            return Err(Error::NonFiniteAngle(self.c1));
        }
        Ok(())
    }

    /// Number of encoding blocks, `⌈d / 3n⌉`.
    pub fn layers(&self) -> usize {
        self.data_dim.div_ceil(3 * self.n_qubits)
    }

    pub fn rotation_slots(&self) -> usize {
        3 * self.n_qubits * self.layers()
    }

    /// Slots that receive angle 0.
    pub fn padding(&self) -> usize {
        self.rotation_slots() - self.data_dim
    }

    /// `(layer, qubit, rotation)` position of feature `k`.
    ///
    /// Features fill each layer qubit by qubit, three rotations per qubit;
    /// padding occupies the trailing slots of the last layer.
    pub fn slot_of(&self, k: usize) -> (usize, usize, usize) {
        let per_layer = 3 * self.n_qubits;
        (k / per_layer, (k % per_layer) / 3, k % 3)
    }

    pub fn build(&self, x: &[f64]) -> Result<Circuit> {
        self.validate()?;
        if x.len() != self.data_dim {
            return Err(Error::DimensionMismatch { expected: self.data_dim, got: x.len() });
        }
        let n = self.n_qubits;
        let mut angles = vec![0.0; self.rotation_slots()];
        angles[..x.len()].copy_from_slice(x);
        let mut circuit = Vec::with_capacity(self.layers() * (5 * n - 1));
        for layer in angles.chunks(3 * n) {
            for (q, z) in layer.chunks(3).enumerate() {
                circuit.push(Gate::H(q));
                circuit.push(Gate::Rz(q, self.c1 * z[0]));
                circuit.push(Gate::Ry(q, self.c1 * z[1]));
                circuit.push(Gate::Rz(q, self.c1 * z[2]));
            }
            for q in 0..n - 1 {
                circuit.push(Gate::SqrtISwap(q, q + 1));
            }
        }
        Ok(circuit)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Type1Config {
    pub n_qubits: usize,
    pub c1: f64,
    pub c2: f64,
    pub nn_edges: Vec<(usize, usize)>,
}

impl Type1Config {
    /// Linear-chain entangling graph.
    pub fn chain(n_qubits: usize, c1: f64, c2: f64) -> Self {
        let nn_edges = (1..n_qubits).map(|q| (q - 1, q)).collect();
        Self { n_qubits, c1, c2, nn_edges }
    }

    fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 {
            return Err(Error::EmptyRegister);
        }
        if !self.c1.is_finite() || !self.c2.is_finite() {
            return Err(Error::InvalidConfig("type 1 constants must be finite".into()));
        }
        for &(a, b) in &self.nn_edges {
            if a >= self.n_qubits || b >= self.n_qubits {
                return Err(Error::QubitOutOfRange { index: a.max(b), n_qubits: self.n_qubits });
            }
            if a == b {
                return Err(Error::DuplicateTarget(a));
            }
        }
        if !edges_connected(self.n_qubits, &self.nn_edges) {
            return Err(Error::InvalidConfig("type 1 entangling graph is not connected".into()));
        }
        Ok(())
    }

    /// Phase angles of `V(x)` on every basis state.
    pub fn phases(&self, x: &[f64]) -> Result<Arc<[f64]>> {
        if x.len() != self.n_qubits {
            return Err(Error::DimensionMismatch { expected: self.n_qubits, got: x.len() });
        }
        let n = self.n_qubits;
        let spin = |b: usize, q: usize| if b >> (n - 1 - q) & 1 == 0 { 1.0 } else { -1.0 };
        Ok((0..1usize << n)
            .map(|b| {
                let local: f64 = (0..n).map(|q| self.c1 * x[q] * spin(b, q)).sum();
                let coupling: f64 = self.nn_edges.iter().map(|&(i, j)| self.c2 * (x[i] - x[j]) * spin(b, i) * spin(b, j)).sum();
                -(local + coupling)
            })
            .collect())
    }

    pub fn build(&self, x: &[f64]) -> Result<Circuit> {
        self.validate()?;
        let v = Gate::DiagonalPhase(self.phases(x)?);
        let mut circuit = Vec::with_capacity(2 * self.n_qubits + 2);
        for _ in 0..2 {
            circuit.push(v.clone());
            circuit.extend((0..self.n_qubits).map(Gate::H));
        }
        Ok(circuit)
    }
}

fn edges_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &(a, b) in edges {
            let next = if a == v {
                b
            } else if b == v {
                a
            } else {
                continue;
            };
            if !seen[next] {
                seen[next] = true;
                stack.push(next);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// An encoding circuit family with fixed hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Ansatz {
    Type1(Type1Config),
    Type2(Type2Config),
}

impl Ansatz {
    pub fn n_qubits(&self) -> usize {
        match self {
            Ansatz::Type1(c) => c.n_qubits,
            Ansatz::Type2(c) => c.n_qubits,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Ansatz::Type1(c) => c.n_qubits,
            Ansatz::Type2(c) => c.data_dim,
        }
    }

    pub fn build(&self, x: &[f64]) -> Result<Circuit> {
        match self {
            Ansatz::Type1(c) => c.build(x),
            Ansatz::Type2(c) => c.build(x),
        }
    }
}

/// Circuit whose all-zeros probability is `|⟨φ(x_j)|φ(x_i)⟩|²`: `U(x_i)`
/// followed by `U†(x_j)`.
///
/// With `contract`, mutually inverse gates meeting at the boundary are
/// removed pairwise until the first non-cancelling pair.
pub fn kernel_circuit(x_i: &[f64], x_j: &[f64], ansatz: &Ansatz, contract: bool) -> Result<Circuit> {
    if x_i.len() != x_j.len() {
        return Err(Error::DimensionMismatch { expected: x_i.len(), got: x_j.len() });
    }
    let mut left = ansatz.build(x_i)?;
    let right = ansatz.build(x_j)?;
    let mut adjoint = right.iter().rev().map(Gate::adjoint).peekable();
    if contract {
        while let (Some(last), Some(next)) = (left.last(), adjoint.peek()) {
            if !last.is_inverse_of(next) {
                break;
            }
            left.pop();
            adjoint.next();
        }
    }
    left.extend(adjoint);
    Ok(left)
}
