//! The Rydberg Hamiltonian
//!
//! H = Σ_v [ (Ω/2) σx⁽ᵛ⁾ + (δ/2) σz⁽ᵛ⁾ ] + Σ_{u<v} V_uv n_u n_v
//!
//! with σz = |g⟩⟨g| − |r⟩⟨r| = 1 − 2n, so a positive δ lowers |r⟩. The
//! operator is real symmetric in the computational basis.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BlockadeGraph;
use crate::schedule::PulseSchedule;

/// Largest atom count for the full 2ⁿ basis.
pub const FULL_BASIS_MAX_ATOMS: usize = 24;
/// Largest blockade-restricted basis dimension.
pub const BLOCKADE_BASIS_MAX_DIM: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    #[default]
    Full,
    Blockade,
}

/// Ordered computational-basis configurations (bit set ⇔ |r⟩).
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    kind: BasisKind,
    n: usize,
    states: Vec<u64>,
    index: Option<HashMap<u64, usize>>,
}

impl BasisSet {
    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn n_atoms(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    pub fn position(&self, config: u64) -> Option<usize> {
        match &self.index {
            None => ((config as usize) < self.states.len()).then_some(config as usize),
            Some(map) => map.get(&config).copied(),
        }
    }

    /// All 2ⁿ configurations.
    pub fn full(n: usize) -> Result<Self> {
        if n > FULL_BASIS_MAX_ATOMS {
            return Err(Error::DimensionLimit { dim: 1u128 << n, limit: 1u128 << FULL_BASIS_MAX_ATOMS });
        }
        Ok(Self { kind: BasisKind::Full, n, states: (0..1u64 << n).collect(), index: None })
    }

    /// Basis restricted to explicitly given configurations, sorted ascending.
    pub fn from_states(n: usize, mut states: Vec<u64>) -> Self {
        states.sort_unstable();
        states.dedup();
        let index = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        Self { kind: BasisKind::Blockade, n, states, index: Some(index) }
    }
}

pub fn build_basis(g: &BlockadeGraph, kind: BasisKind) -> Result<BasisSet> {
    let n = g.n();
    match kind {
        BasisKind::Full => BasisSet::full(n),
        BasisKind::Blockade => {
            let mut states = Vec::new();
            enumerate_independent(g, 0, 0, &mut states)?;
            states.sort_unstable();
            let index = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
            Ok(BasisSet { kind, n, states, index: Some(index) })
        }
    }
}

fn enumerate_independent(g: &BlockadeGraph, start: usize, chosen: u64, out: &mut Vec<u64>) -> Result<()> {
    out.push(chosen);
    if out.len() > BLOCKADE_BASIS_MAX_DIM {
        return Err(Error::DimensionLimit { dim: out.len() as u128, limit: BLOCKADE_BASIS_MAX_DIM as u128 });
    }
    for v in start..g.n() {
        if g.neighbors(v) & chosen == 0 {
            enumerate_independent(g, v + 1, chosen | 1 << v, out)?;
        }
    }
    Ok(())
}

/// How excited pairs interact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InteractionModel {
    /// C6/r⁶ between every excited pair.
    #[default]
    VanDerWaals,
    /// Constant U = C6/a⁶ on blockade-graph edges only.
    BlockadeEdges,
}

/// Coefficients of H = x·Σσx + z·Σσz + w·V.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub x: f64,
    pub z: f64,
    pub w: f64,
}

impl Coefficients {
    pub fn at(omega: f64, delta: f64) -> Self {
        Self { x: omega / 2.0, z: delta / 2.0, w: 1.0 }
    }
}

/// Sparse real-symmetric matrix in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseHermitian {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseHermitian {
    /// Builds from (row, col, value) triplets of the upper triangle, mirroring
    /// each off-diagonal entry.
    pub fn from_upper_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); dim];
        for &(i, j, v) in triplets {
            rows[i].push((j as u32, v));
            if i != j {
                rows[j].push((i as u32, v));
            }
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (c, v) in row {
                if cols.len() > *row_ptr.last().unwrap() && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { dim, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.cols[lo..hi].binary_search(&(j as u32)) {
            Ok(k) => self.vals[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[lo..hi].iter().zip(&self.vals[lo..hi]).map(|(&c, &v)| (c as usize, v))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    /// Exact structural symmetry check.
    pub fn is_hermitian(&self) -> bool {
        (0..self.dim).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn matvec_complex(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| x[j] * v).sum();
        }
    }

    /// Maximum absolute row sum, an upper bound on the spectral norm.
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim).map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Column-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut a = vec![0.0; self.dim * self.dim];
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                a[j * self.dim + i] = v;
            }
        }
        a
    }

    /// Coordinate list, one `row col real imag` line per stored entry.
    pub fn write_coo(&self, mut out: impl Write) -> std::io::Result<()> {
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                writeln!(out, "{i} {j} {v:.17e} {:.17e}", 0.0)?;
            }
        }
        Ok(())
    }
}

/// Precomputed pieces of the Hamiltonian on a basis; assembly at any
/// (Ω, δ) only rescales them.
#[derive(Debug, Clone)]
pub struct HamiltonianTerms {
    graph: BlockadeGraph,
    basis: Arc<BasisSet>,
    model: InteractionModel,
    z_sum: Vec<f64>,
    interaction: Vec<f64>,
    flip_ptr: Vec<usize>,
    flip_idx: Vec<u32>,
}

impl HamiltonianTerms {
    pub fn new(graph: BlockadeGraph, basis: BasisSet, model: InteractionModel) -> Self {
        let n = graph.n();
        let states = basis.states();
        let z_sum = states.iter().map(|&s| n as f64 - 2.0 * s.count_ones() as f64).collect();
        let interaction = states.iter().map(|&s| interaction_energy(&graph, model, s)).collect();
        let mut flip_ptr = Vec::with_capacity(states.len() + 1);
        let mut flip_idx = Vec::new();
        flip_ptr.push(0);
        for &s in states {
            let mut row: Vec<u32> = (0..n).filter_map(|v| basis.position(s ^ (1 << v))).map(|k| k as u32).collect();
            row.sort_unstable();
            flip_idx.extend(row);
            flip_ptr.push(flip_idx.len());
        }
        Self { graph, basis: Arc::new(basis), model, z_sum, interaction, flip_ptr, flip_idx }
    }

    /// Full or blockade basis for `graph`.
    pub fn build(graph: &BlockadeGraph, kind: BasisKind, model: InteractionModel) -> Result<Self> {
        let basis = build_basis(graph, kind)?;
        Ok(Self::new(graph.clone(), basis, model))
    }

    pub fn graph(&self) -> &BlockadeGraph {
        &self.graph
    }

    pub fn basis(&self) -> &Arc<BasisSet> {
        &self.basis
    }

    pub fn model(&self) -> InteractionModel {
        self.model
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Diagonal of Σσz per basis state.
    pub fn z_sum(&self) -> &[f64] {
        &self.z_sum
    }

    /// Interaction energy per basis state.
    pub fn interaction(&self) -> &[f64] {
        &self.interaction
    }

    pub fn assemble(&self, omega: f64, delta: f64) -> SparseHermitian {
        self.assemble_with(Coefficients::at(omega, delta))
    }

    pub fn assemble_with(&self, c: Coefficients) -> SparseHermitian {
        let dim = self.dim();
        let mut triplets = Vec::with_capacity(dim + self.flip_idx.len() / 2);
        for i in 0..dim {
            triplets.push((i, i, c.z * self.z_sum[i] + c.w * self.interaction[i]));
            if c.x != 0.0 {
                for &j in &self.flip_idx[self.flip_ptr[i]..self.flip_ptr[i + 1]] {
                    if (j as usize) > i {
                        triplets.push((i, j as usize, c.x));
                    }
                }
            }
        }
        SparseHermitian::from_upper_triplets(dim, &triplets)
    }

    /// dH/dt = (Ω̇/2) Σσx + (δ̇/2) Σσz using right-hand derivatives of the
    /// schedule.
    pub fn time_derivative(&self, sched: &PulseSchedule, t: f64) -> SparseHermitian {
        self.assemble_with(Coefficients { x: sched.omega_rate(t) / 2.0, z: sched.delta_rate(t) / 2.0, w: 0.0 })
    }

    /// y = H x without materializing H.
    pub fn apply(&self, c: Coefficients, x: &[Complex64], y: &mut [Complex64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let flips: Complex64 = self.flip_idx[self.flip_ptr[i]..self.flip_ptr[i + 1]]
                .iter()
                .map(|&j| x[j as usize])
                .sum();
            *yi = x[i] * (c.z * self.z_sum[i] + c.w * self.interaction[i]) + flips * c.x;
        }
    }
}

fn interaction_energy(g: &BlockadeGraph, model: InteractionModel, s: u64) -> f64 {
    match model {
        InteractionModel::BlockadeEdges => g.u_per_edge() * g.blockade_violations(s) as f64,
        InteractionModel::VanDerWaals => {
            let mut e = 0.0;
            let mut rest = s;
            while rest != 0 {
                let u = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                let mut others = rest;
                while others != 0 {
                    let v = others.trailing_zeros() as usize;
                    others &= others - 1;
                    e += g.pair_interaction(u, v);
                }
            }
            e
        }
    }
}
