//! Atom arrays, the physical parameter set and the blockade graph.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::mhz;

/// Largest atom count supported by the bitmask representations.
pub const MAX_ATOMS: usize = 64;

/// Nearest-neighbor spacing of every tabulated instance, μm.
pub const BUILTIN_SPACING_UM: f64 = 8.0;

/// Control and interaction parameters, internal units (rad/μs, μs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// van der Waals coefficient, rad·μs⁻¹·μm⁶.
    pub c6: f64,
    pub omega0: f64,
    pub delta_i: f64,
    pub delta_f: f64,
    pub total_time: f64,
    pub ramp_time: f64,
}

impl PhysicalParams {
    /// 87Rb |70S⟩ hardware values: C6 = 2π×863 GHz·μm⁶, Ω0 = 2π×1 MHz,
    /// δ from 2π×(−2.5) to 2π×2.5 MHz, T = 5 μs, t_r = 0.5 μs.
    pub fn experiment() -> Self {
        Self {
            c6: mhz(863_000.0),
            omega0: mhz(1.0),
            delta_i: mhz(-2.5),
            delta_f: mhz(2.5),
            total_time: 5.0,
            ramp_time: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_owned()));
        if !(self.c6 > 0.0) {
            return bad("c6 must be positive");
        }
        if !(self.omega0 > 0.0) {
            return bad("omega0 must be positive");
        }
        if !(self.ramp_time > 0.0 && self.total_time > 2.0 * self.ramp_time) {
            return bad("require T > 2 t_r > 0");
        }
        if !(self.delta_i < 0.0 && 0.0 < self.delta_f) {
            return bad("require delta_i < 0 < delta_f");
        }
        Ok(())
    }

    /// R_b = (C6/Ω0)^(1/6), μm.
    pub fn blockade_radius(&self) -> f64 {
        (self.c6 / self.omega0).powf(1.0 / 6.0)
    }

    /// Constant-U interaction C6/a⁶ at spacing `a` μm.
    pub fn interaction_at(&self, a: f64) -> f64 {
        self.c6 / a.powi(6)
    }

    /// Start and end of the detuning sweep, [t_r, T − t_r].
    pub fn sweep_window(&self) -> (f64, f64) {
        (self.ramp_time, self.total_time - self.ramp_time)
    }
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self::experiment()
    }
}

/// Named set of 2D atom coordinates in μm.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomArray {
    name: String,
    positions: Vec<[f64; 2]>,
    spacing: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    name: String,
    positions_um: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spacing_um: Option<f64>,
}

impl AtomArray {
    pub fn new(name: impl Into<String>, positions: Vec<[f64; 2]>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidArray("no atoms".into()));
        }
        if positions.len() > MAX_ATOMS {
            return Err(Error::InvalidArray(format!(
                "{} atoms exceed the limit of {MAX_ATOMS}",
                positions.len()
            )));
        }
        for (i, p) in positions.iter().enumerate() {
            if !(p[0].is_finite() && p[1].is_finite()) {
                return Err(Error::InvalidArray(format!("atom {} has a non-finite coordinate", i + 1)));
            }
            for (j, q) in positions.iter().enumerate().skip(i + 1) {
                if distance(p, q) <= 0.0 {
                    return Err(Error::InvalidArray(format!("atoms {} and {} coincide", i + 1, j + 1)));
                }
            }
        }
        Ok(Self { name: name.into(), positions, spacing: None })
    }

    /// Declares the nominal nearest-neighbor spacing used for the constant-U
    /// interaction. Tabulated coordinates are rounded to 0.01 μm, which skews
    /// C6/a⁶ by more than half a percent if the rounded distance is used.
    pub fn with_spacing(mut self, spacing_um: f64) -> Self {
        self.spacing = Some(spacing_um);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn declared_spacing(&self) -> Option<f64> {
        self.spacing
    }

    pub fn min_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, p) in self.positions.iter().enumerate() {
            for q in &self.positions[i + 1..] {
                best = best.min(distance(p, q));
            }
        }
        best
    }

    /// Declared spacing, or the minimum pairwise distance.
    pub fn spacing(&self) -> f64 {
        self.spacing.unwrap_or_else(|| self.min_distance())
    }

    /// Reorders atoms so that new atom `k` is old atom `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        if order.len() != self.len() {
            return Err(Error::InvalidArray("permutation length mismatch".into()));
        }
        for &i in order {
            if i >= self.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidArray("not a permutation".into()));
            }
        }
        Ok(Self {
            name: self.name.clone(),
            positions: order.iter().map(|&i| self.positions[i]).collect(),
            spacing: self.spacing,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text)?;
        let arr = Self::new(file.name, file.positions_um)?;
        Ok(match file.spacing_um {
            Some(a) => arr.with_spacing(a),
            None => arr,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let file = InstanceFile {
            name: self.name.clone(),
            positions_um: self.positions.clone(),
            spacing_um: self.spacing,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Built-in name, or a path to an instance JSON file.
    pub fn resolve(reference: &str) -> Result<Self> {
        match builtin_instance(reference) {
            Err(Error::UnknownInstance(_)) if Path::new(reference).is_file() => Self::load(reference),
            other => other,
        }
    }
}

fn distance(p: &[f64; 2], q: &[f64; 2]) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}

const Q1D_10: [[f64; 2]; 10] = [
    [6.93, 8.00],
    [20.78, 8.00],
    [34.64, 8.00],
    [0.00, 4.00],
    [13.85, 4.00],
    [27.71, 4.00],
    [41.57, 4.00],
    [6.93, 0.00],
    [20.78, 0.00],
    [34.64, 0.00],
];

const TD_25: [[f64; 2]; 25] = [
    [27.71, 4.00],
    [20.78, 8.00],
    [34.64, 8.00],
    [13.86, 12.00],
    [27.71, 12.00],
    [41.57, 12.00],
    [6.93, 16.00],
    [20.78, 16.00],
    [34.64, 16.00],
    [48.50, 16.00],
    [0.00, 20.00],
    [13.86, 20.00],
    [27.71, 20.00],
    [41.57, 20.00],
    [55.43, 20.00],
    [6.93, 24.00],
    [20.78, 24.00],
    [34.64, 24.00],
    [48.50, 24.00],
    [13.86, 28.00],
    [27.71, 28.00],
    [41.57, 28.00],
    [20.78, 32.00],
    [34.64, 32.00],
    [27.71, 36.00],
];

const TH_37: [[f64; 2]; 37] = [
    [20.78, 0.00],
    [13.86, 4.00],
    [27.71, 4.00],
    [6.93, 8.00],
    [20.78, 8.00],
    [34.64, 8.00],
    [0.00, 12.00],
    [13.86, 12.00],
    [27.71, 12.00],
    [41.57, 12.00],
    [6.93, 16.00],
    [20.78, 16.00],
    [34.64, 16.00],
    [0.00, 20.00],
    [13.86, 20.00],
    [27.71, 20.00],
    [41.57, 20.00],
    [6.93, 24.00],
    [20.78, 24.00],
    [34.64, 24.00],
    [0.00, 28.00],
    [13.86, 28.00],
    [27.71, 28.00],
    [41.57, 28.00],
    [6.93, 32.00],
    [20.78, 32.00],
    [34.64, 32.00],
    [0.00, 36.00],
    [13.86, 36.00],
    [27.71, 36.00],
    [41.57, 36.00],
    [6.93, 40.00],
    [20.78, 40.00],
    [34.64, 40.00],
    [13.86, 44.00],
    [27.71, 44.00],
    [20.78, 48.00],
];

const QP1D_23: [[f64; 2]; 23] = [
    [13.86, 4.00],
    [20.78, 0.00],
    [27.71, 4.00],
    [34.64, 0.00],
    [41.57, 4.00],
    [48.50, 0.00],
    [55.43, 4.00],
    [6.93, 8.00],
    [20.78, 8.00],
    [34.64, 8.00],
    [48.50, 8.00],
    [6.93, 16.00],
    [6.93, 24.00],
    [13.86, 28.00],
    [20.78, 24.00],
    [27.71, 28.00],
    [34.64, 24.00],
    [41.57, 28.00],
    [48.50, 24.00],
    [55.43, 28.00],
    [20.78, 32.00],
    [34.64, 32.00],
    [48.50, 32.00],
];

/// Names accepted by [`builtin_instance`] besides generated `Q1D_<n>` chains.
pub const TABULATED_INSTANCES: [&str; 4] = ["Q1D_10", "TD_25", "TH_37", "Qp1D_23"];

/// Looks up a tabulated instance or a generated k-PXP chain.
///
/// `Q1D_<n>` (n ≠ 10) generates a row-ordered chain at 8 μm spacing;
/// `Q1D_<n>_chain` lists the same atoms in along-chain order.
pub fn builtin_instance(name: &str) -> Result<AtomArray> {
    let table = |rows: &[[f64; 2]]| {
        AtomArray::new(name, rows.to_vec()).map(|a| a.with_spacing(BUILTIN_SPACING_UM))
    };
    match name {
        "Q1D_10" => table(&Q1D_10),
        "TD_25" => table(&TD_25),
        "TH_37" => table(&TH_37),
        "Qp1D_23" => table(&QP1D_23),
        _ => {
            let unknown = || Error::UnknownInstance(name.to_owned());
            let rest = name.strip_prefix("Q1D_").ok_or_else(unknown)?;
            let (count, order) = match rest.strip_suffix("_chain") {
                Some(c) => (c, ChainOrder::AlongChain),
                None => (rest, ChainOrder::Rows),
            };
            let n: usize = count.parse().map_err(|_| unknown())?;
            if !(2..=MAX_ATOMS).contains(&n) {
                return Err(unknown());
            }
            generate_kpxp_chain_ordered(n, BUILTIN_SPACING_UM, order)
        }
    }
}

/// Atom ordering for generated k-PXP chains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChainOrder {
    /// Top row, middle row, bottom row, each left to right.
    #[default]
    Rows,
    /// middle, top, bottom of each triangle in turn, left to right.
    AlongChain,
}

/// Quasi-1D zigzag triangular chain with nearest-neighbor spacing `a`.
///
/// Middle-row atoms sit at (2kc, a/2) and top/bottom atoms at ((2k+1)c, a)
/// and ((2k+1)c, 0) with c = a·cos 30°, so every triangle is equilateral.
pub fn generate_kpxp_chain(n: usize, a: f64) -> Result<AtomArray> {
    generate_kpxp_chain_ordered(n, a, ChainOrder::Rows)
}

pub fn generate_kpxp_chain_ordered(n: usize, a: f64, order: ChainOrder) -> Result<AtomArray> {
    if !(2..=MAX_ATOMS).contains(&n) {
        return Err(Error::InvalidArray(format!("chain length {n} outside 2..={MAX_ATOMS}")));
    }
    if !(a > 0.0) {
        return Err(Error::InvalidArray("spacing must be positive".into()));
    }
    let c = a * (std::f64::consts::PI / 6.0).cos();
    // (row, x, y) with row 0 = top, 1 = middle, 2 = bottom.
    let along: Vec<(u8, [f64; 2])> = (0..n)
        .map(|i| {
            let k = (i / 3) as f64;
            match i % 3 {
                0 => (1, [2.0 * k * c, a / 2.0]),
                1 => (0, [(2.0 * k + 1.0) * c, a]),
                _ => (2, [(2.0 * k + 1.0) * c, 0.0]),
            }
        })
        .collect();
    let positions = match order {
        ChainOrder::AlongChain => along.into_iter().map(|(_, p)| p).collect(),
        ChainOrder::Rows => {
            let mut rows = along;
            rows.sort_by(|l, r| l.0.cmp(&r.0).then(l.1[0].total_cmp(&r.1[0])));
            rows.into_iter().map(|(_, p)| p).collect()
        }
    };
    let name = match order {
        ChainOrder::Rows => format!("Q1D_{n}"),
        ChainOrder::AlongChain => format!("Q1D_{n}_chain"),
    };
    Ok(AtomArray::new(name, positions)?.with_spacing(a))
}

/// Unit-disk graph induced by the blockade radius.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockadeGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<u64>,
    r_b: f64,
    u_per_edge: f64,
    c6: f64,
    positions: Vec<[f64; 2]>,
}

impl BlockadeGraph {
    /// Graph from an explicit edge list. Positions are placed on a line
    /// 100 μm apart, which only matters for the van der Waals interaction.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], u_per_edge: f64) -> Result<Self> {
        if n == 0 || n > MAX_ATOMS {
            return Err(Error::InvalidArray(format!("vertex count {n} outside 1..={MAX_ATOMS}")));
        }
        let mut adjacency = vec![0u64; n];
        let mut list = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            if u >= n || v >= n || u == v {
                return Err(Error::InvalidArray(format!("invalid edge ({u}, {v})")));
            }
            let (u, v) = (u.min(v), u.max(v));
            if adjacency[u] >> v & 1 == 0 {
                list.push((u, v));
            }
            adjacency[u] |= 1 << v;
            adjacency[v] |= 1 << u;
        }
        list.sort_unstable();
        Ok(Self {
            n,
            edges: list,
            adjacency,
            r_b: f64::NAN,
            u_per_edge,
            c6: 0.0,
            positions: (0..n).map(|i| [100.0 * i as f64, 0.0]).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn blockade_radius(&self) -> f64 {
        self.r_b
    }

    pub fn u_per_edge(&self) -> f64 {
        self.u_per_edge
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn neighbors(&self, v: usize) -> u64 {
        self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].count_ones() as usize
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u] >> v & 1 == 1
    }

    pub fn full_mask(&self) -> u64 {
        if self.n == 64 {
            u64::MAX
        } else {
            (1u64 << self.n) - 1
        }
    }

    pub fn is_independent(&self, mask: u64) -> bool {
        let mut rest = mask;
        while rest != 0 {
            let v = rest.trailing_zeros() as usize;
            if self.adjacency[v] & mask != 0 {
                return false;
            }
            rest &= rest - 1;
        }
        true
    }

    /// Number of edges with both endpoints excited.
    pub fn blockade_violations(&self, mask: u64) -> usize {
        let mut count = 0;
        let mut rest = mask;
        while rest != 0 {
            let v = rest.trailing_zeros() as usize;
            count += (self.adjacency[v] & mask & !((1u64 << v) | ((1u64 << v) - 1))).count_ones() as usize;
            rest &= rest - 1;
        }
        count
    }

    /// Pairwise van der Waals energy C6/r⁶, rad/μs.
    pub fn pair_interaction(&self, u: usize, v: usize) -> f64 {
        self.c6 / distance(&self.positions[u], &self.positions[v]).powi(6)
    }
}

/// Builds the blockade graph: edges are pairs within R_b = (C6/Ω0)^(1/6),
/// and U = C6/a⁶ with a the array's nearest-neighbor spacing.
pub fn blockade_graph(arr: &AtomArray, p: &PhysicalParams) -> Result<BlockadeGraph> {
    p.validate()?;
    let n = arr.len();
    let r_b = p.blockade_radius();
    let pos = arr.positions();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if distance(&pos[i], &pos[j]) <= r_b {
                edges.push((i, j));
            }
        }
    }
    let mut g = BlockadeGraph::from_edges(n, &edges, p.interaction_at(arr.spacing()))?;
    g.r_b = r_b;
    g.c6 = p.c6;
    g.positions = pos.to_vec();
    Ok(g)
}

/// [`blockade_graph`] for MIS encoding: rejects edgeless graphs and
/// parameter sets with δ_f ≥ U.
pub fn mis_blockade_graph(arr: &AtomArray, p: &PhysicalParams) -> Result<BlockadeGraph> {
    let g = blockade_graph(arr, p)?;
    if g.n >= 2 && g.edges.is_empty() {
        return Err(Error::DegenerateGraph);
    }
    if !g.edges.is_empty() && p.delta_f >= g.u_per_edge {
        return Err(Error::InvalidParams(format!(
            "delta_f = {} rad/us must stay below U = {} rad/us",
            p.delta_f, g.u_per_edge
        )));
    }
    Ok(g)
}
