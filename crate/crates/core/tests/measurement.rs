use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rydberg_mis::dynamics::EvolveOptions;
use rydberg_mis::*;

fn chain7() -> (BlockadeGraph, HamiltonianTerms) {
    let p = PhysicalParams::experiment();
    let g = mis_blockade_graph(&builtin_instance("Q1D_7_chain").unwrap(), &p).unwrap();
    let h = HamiltonianTerms::build(&g, BasisKind::Full, InteractionModel::default()).unwrap();
    (g, h)
}

/// Kolmogorov survival function Q(λ) = 2 Σ (−1)^{k−1} exp(−2k²λ²).
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let s: f64 = (1..=100).map(|k| (-1f64).powi(k - 1) * (-2.0 * (k * k) as f64 * lambda * lambda).exp()).sum();
    (2.0 * s).clamp(0.0, 1.0)
}

#[test]
fn class_frequencies_converge_to_projector_values() {
    let (g, h) = chain7();
    let res = evolve(&h, &standard_schedule(&PhysicalParams::experiment()).unwrap(), &EvolveOptions::default()).unwrap();
    let stats = count_isets(&g, g.n()).unwrap();

    // Exact class probabilities, ordered MIS, MIS−1, other independent, non-independent.
    let mut exact = [0.0; 4];
    for (&mask, prob) in res.final_state.basis().states().iter().zip(res.final_state.probabilities()) {
        let c = classify_bitstring(&g, &stats, &Bitstring::new(mask, g.n())).unwrap();
        let k = if c.is_mis {
            0
        } else if c.is_mis_minus_1 {
            1
        } else if c.is_independent {
            2
        } else {
            3
        };
        exact[k] += prob;
    }

    let n = 100_000;
    let rep = histogram_report(&sample_shots(&res.final_state, n, None, 7).unwrap(), &g).unwrap();
    let c = rep.classes;
    let empirical = [c.mis.probability, c.mis_minus_1.probability, c.other_independent.probability, c.non_independent.probability];
    let (mut fe, mut fx, mut d) = (0.0, 0.0, 0.0f64);
    for k in 0..4 {
        fe += empirical[k];
        fx += exact[k];
        d = d.max((fe - fx).abs());
    }
    let p_value = kolmogorov_q((n as f64).sqrt() * d);
    assert!(p_value > 0.01, "D = {d:.2e}, p = {p_value:.3}; exact {exact:?} vs {empirical:?}");
    assert!((res.final_p_mis - exact[0]).abs() < 1e-12);
}

#[test]
fn mis_shots_of_basis_state() {
    let (g, h) = chain7();
    let mis: Bitstring = "1001001".parse().unwrap();
    let psi = QuantumState::basis_state(h.basis().clone(), mis.mask()).unwrap();
    let hist = sample_shots(&psi, 100, None, 1).unwrap();
    assert_eq!(hist.counts.len(), 1);
    assert_eq!(hist.counts[&mis.mask()], 100);
    assert_eq!(hist.p_mis(&g).unwrap(), 1.0);
}

#[test]
fn readout_error_rate_of_a_single_excited_atom() {
    let g = BlockadeGraph::from_edges(1, &[], 0.0).unwrap();
    let h = HamiltonianTerms::build(&g, BasisKind::Full, InteractionModel::default()).unwrap();
    let psi = QuantumState::basis_state(h.basis().clone(), 1).unwrap();
    let n = 200_000u64;
    let hist = sample_shots(&psi, n, Some(&SpamModel::experiment()), 3).unwrap();
    let frac = hist.counts.get(&0).copied().unwrap_or(0) as f64 / n as f64;
    let sigma = (0.1 * 0.9 / n as f64).sqrt();
    assert!((frac - 0.10).abs() < 3.0 * sigma, "{frac}");
}

/// Index permutation induced by mirroring the array about x = mean(x) or
/// y = mean(y), if either is a symmetry of the blockade graph.
fn reflection_automorphism(g: &BlockadeGraph) -> Vec<usize> {
    let pos = g.positions();
    let n = pos.len();
    let mean = |axis: usize| pos.iter().map(|p| p[axis]).sum::<f64>() / n as f64;
    for axis in 0..2 {
        let c = mean(axis);
        let image: Option<Vec<usize>> = pos
            .iter()
            .map(|p| {
                let mut q = *p;
                q[axis] = 2.0 * c - q[axis];
                pos.iter().position(|r| (r[0] - q[0]).hypot(r[1] - q[1]) < 0.05)
            })
            .collect();
        if let Some(perm) = image {
            let preserves = g.edges().iter().all(|&(u, v)| g.has_edge(perm[u], perm[v]));
            if preserves && perm.iter().enumerate().any(|(i, &j)| i != j) {
                return perm;
            }
        }
    }
    panic!("no reflection symmetry found");
}

#[test]
fn class_totals_invariant_under_reflection_relabeling() {
    let p = PhysicalParams::experiment();
    let g = blockade_graph(&builtin_instance("TD_25").unwrap(), &p).unwrap();
    let perm = reflection_automorphism(&g);
    let relabel = |mask: u64| (0..g.n()).filter(|&v| mask >> v & 1 == 1).fold(0u64, |m, v| m | 1 << perm[v]);

    // Random greedy independent sets, some corrupted by extra excitations.
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let mut counts = BTreeMap::new();
    for _ in 0..5000 {
        let mut mask = 0u64;
        for _ in 0..40 {
            let v = rng.random_range(0..g.n());
            if g.is_independent(mask | 1 << v) {
                mask |= 1 << v;
            }
        }
        if rng.random::<f64>() < 0.2 {
            mask |= 1 << rng.random_range(0..g.n());
        }
        *counts.entry(mask).or_insert(0u64) += 1;
    }
    let hist = |counts: BTreeMap<u64, u64>| ShotHistogram {
        n_atoms: g.n(),
        n_shots: counts.values().sum(),
        counts,
        seed: 0,
        spam: None,
        detuning_offsets: Vec::new(),
    };
    let mirrored: BTreeMap<u64, u64> = counts.iter().map(|(&m, &c)| (relabel(m), c)).collect();
    let a = histogram_report(&hist(counts), &g).unwrap();
    let b = histogram_report(&hist(mirrored), &g).unwrap();
    assert_eq!(a.classes, b.classes);
    assert!(a.classes.mis.count > 0 && a.classes.non_independent.count > 0);
}
