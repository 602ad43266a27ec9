//! Randomized invariants across geometry, isets, hamiltonian, schedule and
//! measurement.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rydberg_mis::geometry::AtomArray;
use rydberg_mis::units::mhz;
use rydberg_mis::*;

fn graph_strategy(max_n: usize) -> impl Strategy<Value = BlockadeGraph> {
    (1..=max_n).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        let len = pairs.len();
        proptest::collection::vec(any::<bool>(), len).prop_map(move |keep| {
            let edges: Vec<_> = pairs.iter().zip(&keep).filter(|(_, &k)| k).map(|(e, _)| *e).collect();
            BlockadeGraph::from_edges(n, &edges, 1.0).unwrap()
        })
    })
}

fn brute_force_counts(g: &BlockadeGraph) -> Vec<u64> {
    let mut r = vec![0u64; g.n() + 1];
    for mask in 0..(1u64 << g.n()) {
        if g.is_independent(mask) {
            r[mask.count_ones() as usize] += 1;
        }
    }
    while r.len() > 1 && *r.last().unwrap() == 0 {
        r.pop();
    }
    r
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn edges_invariant_under_rigid_motion(theta in 0.0..std::f64::consts::TAU, dx in -100.0..100.0f64, dy in -100.0..100.0f64) {
        let p = PhysicalParams::experiment();
        for name in ["Q1D_10", "TD_25"] {
            let arr = builtin_instance(name).unwrap();
            let (c, s) = (theta.cos(), theta.sin());
            let moved: Vec<[f64; 2]> =
                arr.positions().iter().map(|&[x, y]| [c * x - s * y + dx, s * x + c * y + dy]).collect();
            let moved = AtomArray::new(name, moved).unwrap().with_spacing(arr.spacing());
            let g0 = blockade_graph(&arr, &p).unwrap();
            let g1 = blockade_graph(&moved, &p).unwrap();
            prop_assert_eq!(g0.edges(), g1.edges());
        }
    }

    #[test]
    fn counts_match_enumeration(g in graph_strategy(16)) {
        let s = count_isets(&g, 0).unwrap();
        let r = brute_force_counts(&g);
        prop_assert_eq!(s.mis_size, r.len() - 1);
        for (k, &c) in r.iter().enumerate() {
            prop_assert_eq!(s.count(k), Some(c));
        }
        prop_assert_eq!(s.count(0), Some(1));
        prop_assert_eq!(s.count(1), Some(g.n() as u64));
        let m = s.mis_size;
        let hp = if m == 0 { s.hp } else { r[m - 1] as f64 / (m as f64 * r[m] as f64) };
        prop_assert_eq!(s.hp, hp);
        prop_assert_eq!(s.mis_count(), r[m]);
    }

    #[test]
    fn adding_an_edge_never_increases_counts(g in graph_strategy(12), pick in any::<prop::sample::Index>()) {
        let n = g.n();
        let missing: Vec<(usize, usize)> =
            (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).filter(|&(u, v)| !g.has_edge(u, v)).collect();
        prop_assume!(!missing.is_empty());
        let mut edges = g.edges().to_vec();
        edges.push(missing[pick.index(missing.len())]);
        let denser = BlockadeGraph::from_edges(n, &edges, 1.0).unwrap();
        let (a, b) = (count_isets(&g, 0).unwrap(), count_isets(&denser, 0).unwrap());
        for k in 0..=n {
            prop_assert!(b.count(k).unwrap_or(0) <= a.count(k).unwrap_or(0));
        }
    }

    #[test]
    fn assembled_hamiltonian_is_hermitian(g in graph_strategy(8), omega in 0.0..20.0f64, delta in -20.0..20.0f64) {
        for kind in [BasisKind::Full, BasisKind::Blockade] {
            let h = HamiltonianTerms::build(&g, kind, InteractionModel::BlockadeEdges).unwrap();
            prop_assert!(h.assemble(omega, delta).is_hermitian());
        }
    }

    #[test]
    fn synthesized_schedules_are_valid(j in 0.05..3.0f64, t_min in 1.0..4.0f64, depth in 0.05..0.95f64, frac in 0.05..0.95f64) {
        let p = PhysicalParams::experiment();
        let delta_min = p.delta_i + frac * (p.delta_f - p.delta_i);
        let g_min = depth * p.omega0;
        let profile = GapProfile::synthetic(&p, |t| g_min + (t - t_min).powi(2), t_min, delta_min);
        let s = adglb_schedule(&p, &profile, j).unwrap();
        prop_assert_eq!(s.omega(0.0), 0.0);
        prop_assert_eq!(s.omega(p.total_time), 0.0);
        prop_assert_eq!(s.delta(0.0), p.delta_i);
        prop_assert_eq!(s.delta(p.total_time), p.delta_f);
        prop_assert!((s.delta(t_min) - delta_min).abs() < 1e-12);
        prop_assert!(s.points().windows(2).all(|w| w[1].1 >= w[0].1 && w[1].0 > w[0].0));
    }

    #[test]
    fn zero_channel_composes_to_single_application(p in 0.0..1.0f64, q in 0.0..1.0f64, mask in any::<u16>(), seed in any::<u64>()) {
        let spam = SpamModel::new(p, q).unwrap();
        let zero = SpamModel::new(0.0, 0.0).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(seed);
        let mut r2 = ChaCha8Rng::seed_from_u64(seed);
        let once = spam.apply(mask as u64, 16, &mut r1);
        let twice = zero.apply(spam.apply(mask as u64, 16, &mut r2), 16, &mut r2);
        prop_assert_eq!(once, twice);
    }
}

#[test]
fn adglb_tends_to_piecewise_linear_as_j_vanishes() {
    let p = PhysicalParams::experiment();
    let (t_min, delta_min) = (3.2, mhz(1.0));
    let profile = GapProfile::synthetic(&p, |t| 0.4 + (t - t_min).powi(2), t_min, delta_min);
    let (s0, s1) = p.sweep_window();
    let linear = |t: f64| {
        if t <= t_min {
            p.delta_i + (delta_min - p.delta_i) * (t - s0) / (t_min - s0)
        } else {
            delta_min + (p.delta_f - delta_min) * (t - t_min) / (s1 - t_min)
        }
    };
    let sup = |j: f64| {
        let s = adglb_schedule(&p, &profile, j).unwrap();
        (0..=400).map(|k| s0 + (s1 - s0) * k as f64 / 400.0).map(|t| (s.delta(t) - linear(t)).abs()).fold(0.0, f64::max)
    };
    let errs: Vec<f64> = [0.5, 0.1, 0.01, 0.001].iter().map(|&j| sup(j)).collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(errs[3] < 1e-2 * errs[0], "{errs:?}");
}
