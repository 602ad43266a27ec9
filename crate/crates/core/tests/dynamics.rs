use rydberg_mis::dynamics::EvolveOptions;
use rydberg_mis::*;

#[test]
fn slow_chain7_sweep_ends_in_the_mis_state() {
    let p = PhysicalParams { total_time: 40.0, ..PhysicalParams::experiment() };
    let g = mis_blockade_graph(&builtin_instance("Q1D_7_chain").unwrap(), &p).unwrap();
    let h = HamiltonianTerms::build(&g, BasisKind::Full, InteractionModel::default()).unwrap();
    let r = evolve(&h, &standard_schedule(&p).unwrap(), &EvolveOptions { output_points: 21, ..Default::default() }).unwrap();
    assert_eq!(r.mis_overlap[0], 0.0);
    assert!(r.final_p_e0 > 0.95, "{}", r.final_p_e0);
    assert!((r.final_p_mis - r.final_p_e0).abs() < 1e-9);
    let mis: Bitstring = "1001001".parse().unwrap();
    assert!((r.final_state.probability_of(&[mis.mask()]) - r.final_p_mis).abs() < 1e-12);
    assert!(r.max_norm_error < 1e-8);
}

#[test]
fn blockade_basis_runs_where_the_full_basis_cannot() {
    let p = PhysicalParams::experiment();
    let g = blockade_graph(&builtin_instance("TD_25").unwrap(), &p).unwrap();
    assert!(HamiltonianTerms::build(&g, BasisKind::Full, InteractionModel::default()).is_err());
    let h = HamiltonianTerms::build(&g, BasisKind::Blockade, InteractionModel::BlockadeEdges).unwrap();
    let stats = count_isets(&g, 0).unwrap();
    let total: u64 = (0..=stats.mis_size).map(|k| stats.count(k).unwrap()).sum();
    assert_eq!(h.dim() as u64, total);
}

#[test]
fn small_chain_full_and_blockade_agree_when_interaction_dominates() {
    // Strong interaction: blockade projection becomes exact.
    let p = PhysicalParams::experiment();
    let arr = builtin_instance("Q1D_4").unwrap();
    let g0 = blockade_graph(&arr, &p).unwrap();
    let g = BlockadeGraph::from_edges(g0.n(), g0.edges(), 2e3).unwrap();
    let s = standard_schedule(&p).unwrap();
    let opts = EvolveOptions { output_points: 2, ..Default::default() };
    let full = evolve(&HamiltonianTerms::build(&g, BasisKind::Full, InteractionModel::BlockadeEdges).unwrap(), &s, &opts).unwrap();
    let blk = evolve(&HamiltonianTerms::build(&g, BasisKind::Blockade, InteractionModel::BlockadeEdges).unwrap(), &s, &opts).unwrap();
    assert!((full.final_p_e0 - blk.final_p_e0).abs() < 1e-3, "{} vs {}", full.final_p_e0, blk.final_p_e0);
}
