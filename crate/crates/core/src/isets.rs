//! Exact independent-set combinatorics on blockade graphs.
//!
//! Counting splits on the highest-degree free vertex and stops as soon as
//! the remaining candidate set is edgeless, where every subset contributes
//! a binomial count. A greedy clique cover bounds the size reachable from a
//! node and prunes branches that cannot reach the requested minimum size.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::bits::{lex_key, Bitstring};
use crate::error::{Error, Result};
use crate::geometry::BlockadeGraph;

pub const DEFAULT_NODE_BUDGET: u64 = 1_000_000_000;
pub const DEFAULT_MIS_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy)]
pub struct CountOptions {
    pub node_budget: u64,
    pub mis_cap: usize,
}

impl Default for CountOptions {
    fn default() -> Self {
        Self { node_budget: DEFAULT_NODE_BUDGET, mis_cap: DEFAULT_MIS_CAP }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ISetStats {
    pub n: usize,
    /// R_k for every k at or above the counting threshold.
    pub r: BTreeMap<usize, u64>,
    pub mis_size: usize,
    /// Maximum independent sets as masks in lexicographic order of their
    /// printed form; `None` when their number exceeds the retention cap.
    pub mis_sets: Option<Vec<u64>>,
    /// R_{|MIS|−1} / (|MIS| · R_{|MIS|}).
    pub hp: f64,
    pub nodes: u64,
    #[serde(skip)]
    mis_cap: usize,
}

impl ISetStats {
    pub fn count(&self, k: usize) -> Option<u64> {
        self.r.get(&k).copied()
    }

    pub fn mis_count(&self) -> u64 {
        self.r[&self.mis_size]
    }

    /// Recomputes HP from the stored counts.
    pub fn hardness(&self) -> f64 {
        hardness(&self.r, self.mis_size)
    }

    pub fn mis_support(&self) -> Result<Vec<Bitstring>> {
        match &self.mis_sets {
            Some(sets) => Ok(sets.iter().map(|&m| Bitstring::new(m, self.n)).collect()),
            None => Err(Error::CapExceeded { count: self.mis_count(), cap: self.mis_cap }),
        }
    }
}

fn hardness(r: &BTreeMap<usize, u64>, m: usize) -> f64 {
    let top = r[&m] as f64;
    let below = if m == 0 { 0.0 } else { r[&(m - 1)] as f64 };
    below / (m as f64 * top)
}

/// Upper bound on the largest independent subset of `set`: the number of
/// cliques in a greedy clique partition.
fn clique_cover_bound(g: &BlockadeGraph, set: u64) -> usize {
    let mut rest = set;
    let mut cliques = 0;
    while rest != 0 {
        let v = rest.trailing_zeros() as usize;
        let mut clique = 1u64 << v;
        let mut cand = rest & g.neighbors(v);
        while cand != 0 {
            let u = cand.trailing_zeros() as usize;
            clique |= 1 << u;
            cand &= g.neighbors(u);
        }
        rest &= !clique;
        cliques += 1;
    }
    cliques
}

/// Vertex of `set` with the most neighbors inside `set`, and that degree.
fn branch_vertex(g: &BlockadeGraph, set: u64) -> (usize, usize) {
    let mut best = (usize::MAX, 0);
    let mut rest = set;
    while rest != 0 {
        let v = rest.trailing_zeros() as usize;
        let d = (g.neighbors(v) & set).count_ones() as usize;
        if best.0 == usize::MAX || d > best.1 {
            best = (v, d);
        }
        rest &= rest - 1;
    }
    best
}

struct Search<'a> {
    g: &'a BlockadeGraph,
    budget: u64,
    nodes: u64,
}

impl Search<'_> {
    fn tick(&mut self) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::NodeBudgetExceeded { budget: self.budget });
        }
        Ok(())
    }

    fn max_size(&mut self, free: u64, size: usize, best: &mut usize) -> Result<()> {
        self.tick()?;
        if size + clique_cover_bound(self.g, free) <= *best {
            return Ok(());
        }
        let (v, d) = branch_vertex(self.g, free);
        if v == usize::MAX || d == 0 {
            *best = (*best).max(size + free.count_ones() as usize);
            return Ok(());
        }
        let bit = 1u64 << v;
        self.max_size(free & !bit & !self.g.neighbors(v), size + 1, best)?;
        self.max_size(free & !bit, size, best)
    }

    #[allow(clippy::too_many_arguments)]
    fn count(
        &mut self,
        free: u64,
        chosen: u64,
        size: usize,
        threshold: usize,
        mis_size: usize,
        r: &mut [u64],
        mis: &mut Vec<u64>,
        cap: usize,
    ) -> Result<()> {
        self.tick()?;
        if size + clique_cover_bound(self.g, free) < threshold {
            return Ok(());
        }
        let (v, d) = branch_vertex(self.g, free);
        if v == usize::MAX || d == 0 {
            let p = free.count_ones() as usize;
            let mut binom = 1u64;
            for k in 0..=p {
                if size + k >= threshold {
                    r[size + k] += binom;
                }
                binom = (binom as u128 * (p - k) as u128 / (k + 1) as u128) as u64;
            }
            if size + p == mis_size && mis.len() <= cap {
                mis.push(chosen | free);
            }
            return Ok(());
        }
        let bit = 1u64 << v;
        self.count(free & !bit & !self.g.neighbors(v), chosen | bit, size + 1, threshold, mis_size, r, mis, cap)?;
        self.count(free & !bit, chosen, size, threshold, mis_size, r, mis, cap)
    }
}

/// Exact R_k for every k ≥ min(min_size, |MIS| − 1), with |MIS|, HP and the
/// maximum independent sets.
pub fn count_isets(g: &BlockadeGraph, min_size: usize) -> Result<ISetStats> {
    count_isets_with(g, min_size, &CountOptions::default())
}

pub fn count_isets_with(g: &BlockadeGraph, min_size: usize, opts: &CountOptions) -> Result<ISetStats> {
    if min_size > g.n() {
        return Err(Error::InvalidParams(format!("min_size {min_size} exceeds n = {}", g.n())));
    }
    let mut search = Search { g, budget: opts.node_budget, nodes: 0 };
    let mut mis_size = 0;
    search.max_size(g.full_mask(), 0, &mut mis_size)?;

    let threshold = min_size.min(mis_size.saturating_sub(1));
    let mut r = vec![0u64; g.n() + 1];
    let mut mis = Vec::new();
    search.count(g.full_mask(), 0, 0, threshold, mis_size, &mut r, &mut mis, opts.mis_cap)?;

    let counts: BTreeMap<usize, u64> = (threshold..=mis_size).map(|k| (k, r[k])).collect();
    debug_assert!(r[mis_size + 1..].iter().all(|&c| c == 0));
    let mis_sets = if mis.len() > opts.mis_cap {
        None
    } else {
        mis.sort_by_key(|&m| lex_key(m, g.n()));
        Some(mis)
    };
    let hp = hardness(&counts, mis_size);
    Ok(ISetStats { n: g.n(), r: counts, mis_size, mis_sets, hp, nodes: search.nodes, mis_cap: opts.mis_cap })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Classification {
    pub is_independent: bool,
    pub size: usize,
    pub is_mis: bool,
    pub is_mis_minus_1: bool,
}

pub fn classify_bitstring(g: &BlockadeGraph, stats: &ISetStats, bits: &Bitstring) -> Result<Classification> {
    if bits.len() != g.n() {
        return Err(Error::LengthMismatch { expected: g.n(), got: bits.len() });
    }
    Ok(classify_mask(g, stats.mis_size, bits.mask()))
}

pub(crate) fn classify_mask(g: &BlockadeGraph, mis_size: usize, mask: u64) -> Classification {
    let is_independent = g.is_independent(mask);
    let size = mask.count_ones() as usize;
    Classification {
        is_independent,
        size,
        is_mis: is_independent && size == mis_size,
        is_mis_minus_1: is_independent && mis_size > 0 && size == mis_size - 1,
    }
}

/// All basis configurations spanning the MIS manifold.
pub fn mis_projector_support(g: &BlockadeGraph) -> Result<Vec<Bitstring>> {
    count_isets(g, g.n())?.mis_support()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{blockade_graph, builtin_instance, PhysicalParams};

    /// Independent 2ⁿ enumeration.
    fn brute_force(g: &BlockadeGraph) -> Vec<u64> {
        let mut r = vec![0u64; g.n() + 1];
        for mask in 0..(1u64 << g.n()) {
            if g.is_independent(mask) {
                r[mask.count_ones() as usize] += 1;
            }
        }
        r
    }

    fn graph(name: &str) -> BlockadeGraph {
        blockade_graph(&builtin_instance(name).unwrap(), &PhysicalParams::experiment()).unwrap()
    }

    #[test]
    fn single_edge() {
        let g = BlockadeGraph::from_edges(2, &[(0, 1)], 1.0).unwrap();
        let s = count_isets(&g, 0).unwrap();
        assert_eq!(s.mis_size, 1);
        assert_eq!(s.count(1), Some(2));
        assert_eq!(s.count(0), Some(1));
        assert_eq!(s.hp, 0.5);
    }

    #[test]
    fn triangle_support() {
        let g = BlockadeGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)], 1.0).unwrap();
        let support: Vec<String> = mis_projector_support(&g).unwrap().iter().map(|b| b.to_string()).collect();
        assert_eq!(support, ["001", "010", "100"]);
    }

    #[test]
    fn q1d_10_hardness() {
        let g = graph("Q1D_10");
        let s = count_isets(&g, 0).unwrap();
        assert_eq!(s.mis_size, 4);
        assert!((s.hp - 6.5).abs() < 0.01);
        let oracle = brute_force(&g);
        for (&k, &c) in &s.r {
            assert_eq!(c, oracle[k], "R_{k}");
        }
        // R_{m−1} = 6.5 · m · R_m.
        assert_eq!(oracle[3] as f64, 6.5 * 4.0 * oracle[4] as f64);
        let sets = s.mis_sets.as_ref().unwrap();
        assert_eq!(sets.len() as u64, oracle[4]);
    }

    #[test]
    fn th_37_hardness() {
        let s = count_isets(&graph("TH_37"), 0).unwrap();
        assert_eq!(s.mis_size, 13);
        assert!((s.hp - 5.38).abs() < 0.01, "{}", s.hp);
    }

    #[test]
    fn chain_mis_string() {
        let g = graph("Q1D_7_chain");
        let s = count_isets(&g, 0).unwrap();
        let mis = s.mis_support().unwrap();
        assert_eq!(mis.len(), 1);
        assert_eq!(mis[0].to_string(), "1001001");
        let c = classify_bitstring(&g, &s, &"1001001".parse().unwrap()).unwrap();
        assert_eq!(c, Classification { is_independent: true, size: 3, is_mis: true, is_mis_minus_1: false });
        let zero = classify_bitstring(&g, &s, &"0000000".parse().unwrap()).unwrap();
        assert!(zero.is_independent && zero.size == 0 && !zero.is_mis);
        let adjacent = classify_bitstring(&g, &s, &"1100000".parse().unwrap()).unwrap();
        assert!(!adjacent.is_independent);
        assert!(matches!(
            classify_bitstring(&g, &s, &"10".parse().unwrap()),
            Err(Error::LengthMismatch { expected: 7, got: 2 })
        ));
    }

    #[test]
    fn threshold_only_keeps_large_sets() {
        let g = graph("Q1D_10");
        let s = count_isets(&g, 10).unwrap();
        assert_eq!(s.r.keys().copied().collect::<Vec<_>>(), vec![3, 4]);
        assert!((s.hp - 6.5).abs() < 1e-12);
        assert!(count_isets(&g, 11).is_err());
    }

    #[test]
    fn budget_is_enforced() {
        let g = graph("TH_37");
        let opts = CountOptions { node_budget: 10, ..Default::default() };
        assert!(matches!(count_isets_with(&g, 0, &opts), Err(Error::NodeBudgetExceeded { budget: 10 })));
    }

    #[test]
    fn cap_drops_sets() {
        let g = BlockadeGraph::from_edges(4, &[], 1.0).unwrap();
        let opts = CountOptions { mis_cap: 0, ..Default::default() };
        let s = count_isets_with(&g, 0, &opts).unwrap();
        assert_eq!(s.mis_count(), 1);
        let g = BlockadeGraph::from_edges(4, &[(0, 1), (2, 3)], 1.0).unwrap();
        let s = count_isets_with(&g, 0, &opts).unwrap();
        assert!(s.mis_sets.is_none());
        assert!(matches!(s.mis_support(), Err(Error::CapExceeded { count: 4, .. })));
    }
}
