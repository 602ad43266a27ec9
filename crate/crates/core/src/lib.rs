//! Rydberg-atom maximum-independent-set preparation toolkit.
//!
//! The crate covers the full desk-scale workflow for adiabatic MIS
//! preparation on neutral-atom arrays:
//!
//! - [`geometry`]: atom arrays, physical constants and the unit-disk
//!   blockade graph.
//! - [`isets`]: exact independent-set counting, MIS identification and the
//!   hardness parameter.
//! - [`hamiltonian`]: the Rydberg Hamiltonian as a sparse real-symmetric
//!   operator on the full or blockade-restricted basis.
//! - [`spectrum`]: lowest eigenpairs along a schedule and the gap profile.
//! - [`schedule`]: standard, gap-guided (ADGLB) and offset-transferred
//!   detuning schedules.
//! - [`dynamics`]: Schrödinger integration and the effective two-level model.
//! - [`measurement`]: shot sampling with a readout-error channel.
//!
//! Units: angular frequencies in rad/μs, times in μs, lengths in μm, ħ = 1.
//! File formats and reports use frequency/2π in MHz; see [`units`].

// `!(x > 0.0)` guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bits;
pub mod dynamics;
pub mod eigen;
pub mod error;
pub mod geometry;
pub mod hamiltonian;
pub mod isets;
pub mod measurement;
pub mod schedule;
pub mod spectrum;
pub mod units;

// Links the system OpenBLAS/LAPACK.
extern crate openblas_src;

pub use bits::Bitstring;
pub use dynamics::{
    build_two_level_model, evolve, evolve_two_level, mis_probability, EvolutionResult,
    EvolveOptions, QuantumState, TwoLevelModel,
};
pub use error::{Error, Result};
pub use geometry::{
    blockade_graph, builtin_instance, generate_kpxp_chain, mis_blockade_graph, AtomArray,
    BlockadeGraph, ChainOrder, PhysicalParams,
};
pub use hamiltonian::{build_basis, BasisKind, BasisSet, HamiltonianTerms, InteractionModel, SparseHermitian};
pub use isets::{classify_bitstring, count_isets, mis_projector_support, ISetStats};
pub use measurement::{histogram_report, sample_shots, HistogramReport, ShotHistogram, SpamModel};
pub use schedule::{
    adglb_schedule, fit_eta_polynomials, standard_schedule, transfer_schedule, zeta_interpolant,
    EtaPolynomials, PulseSchedule, ScheduleKind,
};
pub use spectrum::{eigenpairs_lowest2, scan_gap, track_mis_overlap, GapProfile, MisReference};
