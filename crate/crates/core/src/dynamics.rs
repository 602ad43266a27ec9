//! Time evolution under a schedule.
//!
//! The propagator is the fourth-order commutator-free Magnus scheme with two
//! exponentials per step; each exponential acts through a Lanczos (Krylov)
//! approximation. Steps are controlled by step doubling.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigen::lowest_eigenpairs;
use crate::error::{Error, Result};
use crate::geometry::BlockadeGraph;
use crate::hamiltonian::{BasisKind, BasisSet, Coefficients, HamiltonianTerms};
use crate::isets::mis_projector_support;
use crate::schedule::PulseSchedule;
use crate::spectrum::{GapProfile, MisReference};

type C64 = Complex64;

const SQRT3_6: f64 = 0.288_675_134_594_812_9; // √3/6
const NODE_1: f64 = 0.5 - SQRT3_6;
const NODE_2: f64 = 0.5 + SQRT3_6;
const WEIGHT_1: f64 = 0.25 - SQRT3_6;
const WEIGHT_2: f64 = 0.25 + SQRT3_6;

/// Time-dependent controls driving the Hamiltonian.
pub trait Drive {
    fn omega(&self, t: f64) -> f64;
    fn delta(&self, t: f64) -> f64;
    fn total_time(&self) -> f64;
    /// Times where the controls have kinks.
    fn knots(&self) -> Vec<f64>;
}

impl Drive for PulseSchedule {
    fn omega(&self, t: f64) -> f64 {
        PulseSchedule::omega(self, t)
    }

    fn delta(&self, t: f64) -> f64 {
        PulseSchedule::delta(self, t)
    }

    fn total_time(&self) -> f64 {
        PulseSchedule::total_time(self)
    }

    fn knots(&self) -> Vec<f64> {
        self.breakpoint_times().collect()
    }
}

/// s ↦ controls at T − s.
#[derive(Debug, Clone, Copy)]
pub struct Reversed<'a>(pub &'a PulseSchedule);

impl Drive for Reversed<'_> {
    fn omega(&self, t: f64) -> f64 {
        self.0.omega(self.0.total_time() - t)
    }

    fn delta(&self, t: f64) -> f64 {
        self.0.delta(self.0.total_time() - t)
    }

    fn total_time(&self) -> f64 {
        self.0.total_time()
    }

    fn knots(&self) -> Vec<f64> {
        let t_end = self.0.total_time();
        let mut k: Vec<f64> = self.0.breakpoint_times().map(|t| t_end - t).collect();
        k.reverse();
        k
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    basis: Arc<BasisSet>,
    amplitudes: Vec<C64>,
}

impl QuantumState {
    pub fn new(basis: Arc<BasisSet>, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::LengthMismatch { expected: basis.dim(), got: amplitudes.len() });
        }
        Ok(Self { basis, amplitudes })
    }

    /// The computational-basis state `config`.
    pub fn basis_state(basis: Arc<BasisSet>, config: u64) -> Result<Self> {
        let i = basis
            .position(config)
            .ok_or_else(|| Error::InvalidParams(format!("configuration {config:#b} is not in the basis")))?;
        let mut amplitudes = vec![C64::default(); basis.dim()];
        amplitudes[i] = C64::new(1.0, 0.0);
        Ok(Self { basis, amplitudes })
    }

    pub fn basis(&self) -> &Arc<BasisSet> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    pub fn conj(&self) -> Self {
        Self { basis: self.basis.clone(), amplitudes: self.amplitudes.iter().map(|a| a.conj()).collect() }
    }

    /// Born probability of each basis configuration.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Total probability on the given configurations.
    pub fn probability_of(&self, configs: &[u64]) -> f64 {
        configs.iter().filter_map(|&c| self.basis.position(c)).map(|i| self.amplitudes[i].norm_sqr()).sum()
    }

    /// |⟨a|b⟩|².
    pub fn fidelity(&self, other: &Self) -> f64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum::<C64>().norm_sqr()
    }

    pub fn to_file(&self) -> StateFile {
        StateFile {
            n_atoms: self.basis.n_atoms(),
            basis: self.basis.kind(),
            configs: (self.basis.kind() == BasisKind::Blockade).then(|| self.basis.states().to_vec()),
            re: self.amplitudes.iter().map(|a| a.re).collect(),
            im: self.amplitudes.iter().map(|a| a.im).collect(),
        }
    }

    pub fn from_file(f: StateFile) -> Result<Self> {
        let basis = match (f.basis, f.configs) {
            (BasisKind::Full, _) => BasisSet::full(f.n_atoms)?,
            (BasisKind::Blockade, Some(c)) => BasisSet::from_states(f.n_atoms, c),
            (BasisKind::Blockade, None) => return Err(Error::InvalidParams("blockade state file lists no configs".into())),
        };
        if f.re.len() != f.im.len() {
            return Err(Error::LengthMismatch { expected: f.re.len(), got: f.im.len() });
        }
        let amps = f.re.iter().zip(&f.im).map(|(&r, &i)| C64::new(r, i)).collect();
        Self::new(Arc::new(basis), amps)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(&self.to_file())? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_file(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// On-disk state vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub n_atoms: usize,
    pub basis: BasisKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub configs: Option<Vec<u64>>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOptions {
    /// Points of the reported time grid on [0, T].
    pub output_points: usize,
    /// Step-doubling error bound per step.
    pub local_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub krylov_tol: f64,
    pub krylov_dim: usize,
    /// Largest allowed change of the final p_e0 when max_step is halved.
    pub convergence_tol: f64,
    pub max_halvings: usize,
    pub check_convergence: bool,
    /// Eigenvalues within this distance of E0 count as ground space.
    pub degeneracy_tol: f64,
    /// MIS reference; defaults to the MIS projector of the graph.
    pub mis: Option<MisReference>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            output_points: 200,
            local_tol: 1e-8,
            max_step: 0.02,
            min_step: 1e-10,
            krylov_tol: 1e-12,
            krylov_dim: 40,
            convergence_tol: 1e-6,
            max_halvings: 4,
            check_convergence: true,
            degeneracy_tol: 1e-6,
            mis: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    pub p_e0: Vec<f64>,
    pub p_leak: Vec<f64>,
    pub mis_overlap: Vec<f64>,
    pub final_state: QuantumState,
    pub final_p_e0: f64,
    pub final_p_mis: f64,
    /// Largest |‖ψ‖ − 1| seen at any accepted step.
    pub max_norm_error: f64,
    pub steps: usize,
    /// Step cap of the reported run.
    pub max_step: f64,
    /// |Δ final p_e0| between the last two step caps, when checked.
    pub convergence_change: Option<f64>,
}

impl EvolutionResult {
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "t_us,p_e0,p_leak,mis_overlap")?;
        for k in 0..self.times.len() {
            writeln!(out, "{:.9},{:.12},{:.12},{:.12}", self.times[k], self.p_e0[k], self.p_leak[k], self.mis_overlap[k])?;
        }
        Ok(())
    }
}

/// Evolves all-|g⟩ over [0, T] and reports populations on the output grid.
/// The run is repeated with halved step caps until the final ground-state
/// population changes by less than `convergence_tol`.
pub fn evolve(h: &HamiltonianTerms, sched: &PulseSchedule, opts: &EvolveOptions) -> Result<EvolutionResult> {
    let mis = match &opts.mis {
        Some(m) => m.clone(),
        None => MisReference::Manifold(mis_projector_support(h.graph())?.iter().map(|b| b.mask()).collect()),
    };
    let psi0 = QuantumState::basis_state(h.basis().clone(), 0)?;
    let mut cap = opts.max_step;
    if !opts.check_convergence {
        return run(h, sched, &psi0, opts, cap, &mis, true);
    }
    let mut prev = run(h, sched, &psi0, opts, cap, &mis, false)?.final_p_e0;
    for _ in 0..opts.max_halvings {
        cap /= 2.0;
        let mut res = run(h, sched, &psi0, opts, cap, &mis, true)?;
        let change = (res.final_p_e0 - prev).abs();
        res.convergence_change = Some(change);
        if change < opts.convergence_tol {
            return Ok(res);
        }
        prev = res.final_p_e0;
    }
    Err(Error::NotConverged(format!(
        "final p_e0 still moves by more than {} after {} halvings of the step cap",
        opts.convergence_tol, opts.max_halvings
    )))
}

/// Propagates `psi` from 0 to T under any drive; no population bookkeeping.
pub fn propagate(h: &HamiltonianTerms, drive: &dyn Drive, psi: &QuantumState, opts: &EvolveOptions) -> Result<QuantumState> {
    let mut out = psi.clone();
    let mut stepper = Stepper::new(h, drive, opts, opts.max_step);
    let mut knots = drive.knots();
    knots.push(0.0);
    knots.push(drive.total_time());
    knots.sort_by(f64::total_cmp);
    knots.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    for w in knots.windows(2) {
        stepper.advance(&mut out.amplitudes, w[0], w[1])?;
    }
    Ok(out)
}

fn run(
    h: &HamiltonianTerms,
    sched: &PulseSchedule,
    psi0: &QuantumState,
    opts: &EvolveOptions,
    cap: f64,
    mis: &MisReference,
    record: bool,
) -> Result<EvolutionResult> {
    let t_end = sched.total_time();
    let n_out = opts.output_points.max(2);
    let grid: Vec<f64> = (0..n_out).map(|k| if k == n_out - 1 { t_end } else { t_end * k as f64 / (n_out - 1) as f64 }).collect();
    let mut knots: Vec<(f64, bool)> = grid.iter().map(|&t| (t, true)).collect();
    knots.extend(sched.breakpoint_times().map(|t| (t, false)));
    knots.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Merge coincident knots, keeping the output flag.
    let mut merged: Vec<(f64, bool)> = Vec::with_capacity(knots.len());
    for (t, out) in knots {
        match merged.last_mut() {
            Some(last) if (t - last.0).abs() < 1e-12 => last.1 |= out,
            _ => merged.push((t, out)),
        }
    }

    let mut psi = psi0.clone();
    let mut stepper = Stepper::new(h, sched, opts, cap);
    let mut res = EvolutionResult {
        times: Vec::new(),
        p_e0: Vec::new(),
        p_leak: Vec::new(),
        mis_overlap: Vec::new(),
        final_state: psi0.clone(),
        final_p_e0: 0.0,
        final_p_mis: 0.0,
        max_norm_error: 0.0,
        steps: 0,
        max_step: cap,
        convergence_change: None,
    };
    let overlap = |psi: &QuantumState| match mis {
        MisReference::Single(c) => psi.probability_of(std::slice::from_ref(c)),
        MisReference::Manifold(cs) => psi.probability_of(cs),
    };
    let mut prev_t = 0.0;
    for (k, &(t, is_out)) in merged.iter().enumerate() {
        if k > 0 {
            stepper.advance(&mut psi.amplitudes, prev_t, t)?;
        }
        prev_t = t;
        let last = k == merged.len() - 1;
        if (record && is_out) || last {
            let p = ground_population(h, sched.omega(t), sched.delta(t), &psi, opts.degeneracy_tol, t)?;
            if record && is_out {
                res.times.push(t);
                res.p_e0.push(p);
                res.p_leak.push(1.0 - p);
                res.mis_overlap.push(overlap(&psi));
            }
            if last {
                res.final_p_e0 = p;
            }
        }
    }
    res.final_p_mis = overlap(&psi);
    res.final_state = psi;
    res.max_norm_error = stepper.max_norm_error;
    res.steps = stepper.steps;
    Ok(res)
}

/// Population of the ground eigenspace (eigenvalues within `tol` of E0).
pub fn ground_population(h: &HamiltonianTerms, omega: f64, delta: f64, psi: &QuantumState, tol: f64, t: f64) -> Result<f64> {
    let m = h.assemble(omega, delta);
    let dim = m.dim();
    let mut k = 2.min(dim);
    loop {
        let e = lowest_eigenpairs(&m, k).map_err(|err| match err {
            Error::EigenNonConvergence { detail, .. } => Error::EigenNonConvergence { t: Some(t), detail },
            other => other,
        })?;
        let degenerate = e.values.iter().filter(|&&v| v - e.values[0] <= tol).count();
        if degenerate < k || k == dim {
            let p = e.vectors[..degenerate]
                .iter()
                .map(|v| v.iter().zip(psi.amplitudes()).map(|(a, b)| b * a).sum::<C64>().norm_sqr())
                .sum::<f64>();
            return Ok(p.min(1.0));
        }
        k = (2 * k).min(dim);
    }
}

struct Stepper<'a> {
    h: &'a HamiltonianTerms,
    drive: &'a dyn Drive,
    opts: &'a EvolveOptions,
    cap: f64,
    proposal: f64,
    steps: usize,
    max_norm_error: f64,
    krylov: Krylov,
}

impl<'a> Stepper<'a> {
    fn new(h: &'a HamiltonianTerms, drive: &'a dyn Drive, opts: &'a EvolveOptions, cap: f64) -> Self {
        Self {
            h,
            drive,
            opts,
            cap,
            proposal: cap,
            steps: 0,
            max_norm_error: 0.0,
            krylov: Krylov::new(h.dim(), opts.krylov_dim, opts.krylov_tol),
        }
    }

    fn advance(&mut self, psi: &mut [C64], t0: f64, t1: f64) -> Result<()> {
        let mut t = t0;
        let mut full = psi.to_vec();
        let mut half = psi.to_vec();
        while t1 - t > 1e-13 {
            let step = self.proposal.min(self.cap).min(t1 - t);
            full.copy_from_slice(psi);
            half.copy_from_slice(psi);
            self.cf4(&mut full, t, step)?;
            self.cf4(&mut half, t, step / 2.0)?;
            self.cf4(&mut half, t + step / 2.0, step / 2.0)?;
            let err = distance(&full, &half) / 15.0;
            let factor = if err == 0.0 { 2.0 } else { (0.9 * (self.opts.local_tol / err).powf(0.2)).clamp(0.2, 2.0) };
            if err <= self.opts.local_tol {
                psi.copy_from_slice(&half);
                t = if t1 - (t + step) < 1e-13 { t1 } else { t + step };
                self.steps += 1;
                self.max_norm_error = self.max_norm_error.max((norm(psi) - 1.0).abs());
                // A step clipped by the segment end says nothing about the next one.
                if step >= self.proposal.min(self.cap) {
                    self.proposal = (step * factor).min(self.cap);
                }
            } else {
                self.proposal = step * factor;
                if self.proposal < self.opts.min_step {
                    return Err(Error::StepUnderflow { t });
                }
            }
        }
        Ok(())
    }

    /// exp(−iΔt(a₁H₁ + a₂H₂)) exp(−iΔt(a₂H₁ + a₁H₂)) with H_k = H(t + c_k Δt).
    fn cf4(&mut self, psi: &mut [C64], t: f64, dt: f64) -> Result<()> {
        let (t1, t2) = (t + NODE_1 * dt, t + NODE_2 * dt);
        let (o1, o2) = (self.drive.omega(t1), self.drive.omega(t2));
        let (d1, d2) = (self.drive.delta(t1), self.drive.delta(t2));
        for (a, b) in [(WEIGHT_2, WEIGHT_1), (WEIGHT_1, WEIGHT_2)] {
            let c = Coefficients { x: (a * o1 + b * o2) / 2.0, z: (a * d1 + b * d2) / 2.0, w: a + b };
            let h = self.h;
            self.krylov.expm(|x, y| h.apply(c, x, y), psi, dt).map_err(|_| Error::StepUnderflow { t })?;
        }
        Ok(())
    }
}

/// Lanczos approximation of v ↦ exp(−iτA)v for Hermitian A.
struct Krylov {
    m_max: usize,
    tol: f64,
    basis: Vec<Vec<C64>>,
    w: Vec<C64>,
}

impl Krylov {
    fn new(dim: usize, m_max: usize, tol: f64) -> Self {
        let m_max = m_max.min(dim).max(1);
        Self { m_max, tol, basis: vec![vec![C64::default(); dim]; m_max + 1], w: vec![C64::default(); dim] }
    }

    fn expm(&mut self, apply: impl Fn(&[C64], &mut [C64]), v: &mut [C64], tau: f64) -> std::result::Result<(), ()> {
        let mut done = 0.0;
        let mut sub = tau;
        while tau - done > 1e-15 * tau.abs() {
            sub = sub.min(tau - done);
            if self.substep(&apply, v, sub, self.tol * sub / tau) {
                done += sub;
            } else {
                sub /= 2.0;
                if sub < 1e-14 * tau {
                    return Err(());
                }
            }
        }
        Ok(())
    }

    fn substep(&mut self, apply: &impl Fn(&[C64], &mut [C64]), v: &mut [C64], tau: f64, tol: f64) -> bool {
        let beta0 = norm(v);
        if beta0 == 0.0 {
            return true;
        }
        for (b, x) in self.basis[0].iter_mut().zip(v.iter()) {
            *b = x / beta0;
        }
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        for j in 0..self.m_max {
            apply(&self.basis[j], &mut self.w);
            let a = dotc(&self.basis[j], &self.w).re;
            alpha.push(a);
            for i in 0..=j {
                let c = dotc(&self.basis[i], &self.w);
                for (x, y) in self.w.iter_mut().zip(&self.basis[i]) {
                    *x -= c * y;
                }
            }
            let b = norm(&self.w);
            let m = j + 1;
            let (y, last) = small_expm(&alpha, &beta, tau);
            let err = beta0 * b * last;
            let exhausted = b <= 1e-14 * (a.abs() + beta.last().copied().unwrap_or(0.0) + 1.0);
            if err <= tol || exhausted {
                v.iter_mut().for_each(|x| *x = C64::default());
                for (k, yk) in y.iter().enumerate().take(m) {
                    let s = yk * beta0;
                    for (x, q) in v.iter_mut().zip(&self.basis[k]) {
                        *x += s * q;
                    }
                }
                return true;
            }
            beta.push(b);
            for (q, x) in self.basis[j + 1].iter_mut().zip(&self.w) {
                *q = x / b;
            }
        }
        false
    }
}

/// exp(−iτT)e₁ for the tridiagonal T(α, β), plus |last component|.
fn small_expm(alpha: &[f64], beta: &[f64], tau: f64) -> (Vec<C64>, f64) {
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j || j + 1 == i {
            beta[i.min(j)]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let s = &eig.eigenvectors;
    let phases: Vec<C64> = eig.eigenvalues.iter().enumerate().map(|(l, &th)| C64::from_polar(s[(0, l)], -tau * th)).collect();
    let y: Vec<C64> = (0..m).map(|k| (0..m).map(|l| phases[l] * s[(k, l)]).sum()).collect();
    let last = y[m - 1].norm();
    (y, last)
}

fn dotc(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn distance(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// Σ over MIS configurations of |amplitude|² in the final state.
pub fn mis_probability(res: &EvolutionResult, g: &BlockadeGraph) -> Result<f64> {
    let configs: Vec<u64> = mis_projector_support(g)?.iter().map(|b| b.mask()).collect();
    Ok(res.final_state.probability_of(&configs))
}

/// Effective two-level model in the instantaneous {E0, E1} frame:
/// H_ad = coupling·σy − (gap/2)·σz.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLevelModel {
    pub times: Vec<f64>,
    /// ⟨E1|dH/dt|E0⟩ / ΔE01, rad/μs.
    pub coupling: Vec<f64>,
    pub gap: Vec<f64>,
}

impl TwoLevelModel {
    pub fn new(times: Vec<f64>, coupling: Vec<f64>, gap: Vec<f64>) -> Result<Self> {
        if coupling.len() != times.len() || gap.len() != times.len() {
            return Err(Error::LengthMismatch { expected: times.len(), got: coupling.len().min(gap.len()) });
        }
        if times.len() < 2 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParams("two-level grid must hold >= 2 increasing times".into()));
        }
        Ok(Self { times, coupling, gap })
    }

    fn interp(&self, y: &[f64], t: f64) -> f64 {
        let i = self.times.partition_point(|&x| x <= t);
        if i == 0 {
            return y[0];
        }
        if i == self.times.len() {
            return y[i - 1];
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        y[i - 1] + (y[i] - y[i - 1]) * (t - t0) / (t1 - t0)
    }

    pub fn coupling_at(&self, t: f64) -> f64 {
        self.interp(&self.coupling, t)
    }

    pub fn gap_at(&self, t: f64) -> f64 {
        self.interp(&self.gap, t)
    }

    pub fn write_csv(&self, p_e1: &[f64], mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "t_us,gap,coupling,p_e1")?;
        for k in 0..self.times.len() {
            writeln!(
                out,
                "{:.9},{:.9},{:.9},{:.12}",
                self.times[k],
                crate::units::to_mhz(self.gap[k]),
                crate::units::to_mhz(self.coupling[k]),
                p_e1.get(k).copied().unwrap_or(f64::NAN)
            )?;
        }
        Ok(())
    }
}

/// Couplings from the stored eigenvectors of `profile`. Eigenvector signs are
/// carried continuously from sample to sample so the coupling does not flip
/// with the phase convention of individual solves.
pub fn build_two_level_model(h: &HamiltonianTerms, sched: &PulseSchedule, profile: &GapProfile) -> Result<TwoLevelModel> {
    let vecs = profile.vectors.as_ref().ok_or(Error::MissingEigenvectors)?;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut coupling = Vec::with_capacity(vecs.len());
    let mut y = vec![0.0; h.dim()];
    for (s, (v0, v1)) in profile.samples.iter().zip(vecs) {
        let (mut v0, mut v1) = (v0.clone(), v1.clone());
        if let Some((p0, p1)) = &prev {
            if dot(&v0, p0) < 0.0 {
                v0.iter_mut().for_each(|x| *x = -*x);
            }
            if dot(&v1, p1) < 0.0 {
                v1.iter_mut().for_each(|x| *x = -*x);
            }
        }
        h.time_derivative(sched, s.t).matvec(&v0, &mut y);
        coupling.push(if s.gap > 0.0 { dot(&v1, &y) / s.gap } else { 0.0 });
        prev = Some((v0, v1));
    }
    TwoLevelModel::new(profile.samples.iter().map(|s| s.t).collect(), coupling, profile.samples.iter().map(|s| s.gap).collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// P_E1(t) = |c1|² on the model grid, starting from (c0, c1) = (1, 0).
pub fn evolve_two_level(m: &TwoLevelModel) -> Result<Vec<f64>> {
    evolve_two_level_with(m, &EvolveOptions::default())
}

pub fn evolve_two_level_with(m: &TwoLevelModel, opts: &EvolveOptions) -> Result<Vec<f64>> {
    let mut c = [C64::new(1.0, 0.0), C64::default()];
    let mut out = vec![0.0];
    let mut proposal = opts.max_step;
    for w in m.times.windows(2) {
        let (mut t, t1) = (w[0], w[1]);
        while t1 - t > 1e-13 {
            let step = proposal.min(opts.max_step).min(t1 - t);
            let full = two_level_cf4(m, c, t, step);
            let half = two_level_cf4(m, two_level_cf4(m, c, t, step / 2.0), t + step / 2.0, step / 2.0);
            let err = ((full[0] - half[0]).norm_sqr() + (full[1] - half[1]).norm_sqr()).sqrt() / 15.0;
            let factor = if err == 0.0 { 2.0 } else { (0.9 * (opts.local_tol / err).powf(0.2)).clamp(0.2, 2.0) };
            if err <= opts.local_tol {
                c = half;
                t = if t1 - (t + step) < 1e-13 { t1 } else { t + step };
                if step >= proposal.min(opts.max_step) {
                    proposal = (step * factor).min(opts.max_step);
                }
            } else {
                proposal = step * factor;
                if proposal < opts.min_step {
                    return Err(Error::StepUnderflow { t });
                }
            }
        }
        out.push(c[1].norm_sqr());
    }
    Ok(out)
}

fn two_level_cf4(m: &TwoLevelModel, c: [C64; 2], t: f64, dt: f64) -> [C64; 2] {
    let (t1, t2) = (t + NODE_1 * dt, t + NODE_2 * dt);
    let (k1, k2) = (m.coupling_at(t1), m.coupling_at(t2));
    let (g1, g2) = (m.gap_at(t1), m.gap_at(t2));
    let mut c = c;
    for (a, b) in [(WEIGHT_2, WEIGHT_1), (WEIGHT_1, WEIGHT_2)] {
        let y = a * k1 + b * k2;
        let z = -(a * g1 + b * g2) / 2.0;
        c = expm_2x2(y, z, dt, c);
    }
    c
}

/// exp(−iτ(y σy + z σz)) c.
fn expm_2x2(y: f64, z: f64, tau: f64, c: [C64; 2]) -> [C64; 2] {
    let r = (y * y + z * z).sqrt();
    if r == 0.0 {
        return c;
    }
    let (cs, sn) = ((r * tau).cos(), (r * tau).sin() / r);
    let i = C64::i();
    // (yσy + zσz) c = (z c0 − i y c1, i y c0 − z c1)
    let hc = [c[0] * z - i * y * c[1], i * y * c[0] - c[1] * z];
    [c[0] * cs - i * sn * hc[0], c[1] * cs - i * sn * hc[1]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{blockade_graph, builtin_instance, PhysicalParams};
    use crate::hamiltonian::InteractionModel;
    use crate::schedule::standard_schedule;
    use crate::spectrum::{scan_gap_with, ScanOptions};

    fn single_atom() -> HamiltonianTerms {
        let g = BlockadeGraph::from_edges(1, &[], 0.0).unwrap();
        HamiltonianTerms::build(&g, BasisKind::Full, InteractionModel::default()).unwrap()
    }

    #[test]
    fn krylov_matches_rabi_rotation() {
        // H = (Ω/2)σx: |g⟩ → cos(Ωt/2)|g⟩ − i sin(Ωt/2)|r⟩.
        let h = single_atom();
        let mut k = Krylov::new(2, 40, 1e-13);
        let mut v = vec![C64::new(1.0, 0.0), C64::default()];
        let c = Coefficients { x: 1.5, z: 0.0, w: 1.0 };
        k.expm(|x, y| h.apply(c, x, y), &mut v, 0.7).unwrap();
        assert!((v[0] - C64::new((1.5 * 0.7f64).cos(), 0.0)).norm() < 1e-12);
        assert!((v[1] - C64::new(0.0, -(1.5 * 0.7f64).sin())).norm() < 1e-12);
    }

    #[test]
    fn slow_single_atom_sweep_is_adiabatic() {
        let mut p = PhysicalParams::experiment();
        p.total_time = 50.0;
        let s = standard_schedule(&p).unwrap();
        let opts = EvolveOptions { output_points: 11, mis: Some(MisReference::Single(1)), ..Default::default() };
        let r = evolve(&single_atom(), &s, &opts).unwrap();
        assert!(r.final_p_e0 > 0.999, "{}", r.final_p_e0);
        assert!((r.p_e0[0] - 1.0).abs() < 1e-12);
        assert!(r.max_norm_error < 1e-8);
        for k in 0..r.times.len() {
            assert_eq!(r.p_e0[k] + r.p_leak[k], 1.0);
        }
    }

    #[test]
    fn time_reversal_returns_to_start() {
        let p = PhysicalParams::experiment();
        let g = blockade_graph(&builtin_instance("Q1D_4").unwrap(), &p).unwrap();
        let h = HamiltonianTerms::build(&g, BasisKind::Full, InteractionModel::default()).unwrap();
        let s = standard_schedule(&p).unwrap();
        let psi0 = QuantumState::basis_state(h.basis().clone(), 0).unwrap();
        let opts = EvolveOptions::default();
        let fwd = propagate(&h, &s, &psi0, &opts).unwrap();
        let back = propagate(&h, &Reversed(&s), &fwd.conj(), &opts).unwrap().conj();
        assert!(back.fidelity(&psi0) > 1.0 - 1e-6);
    }

    #[test]
    fn two_level_closed_forms() {
        let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.1).collect();
        let zero = TwoLevelModel::new(times.clone(), vec![0.0; 21], vec![3.0; 21]).unwrap();
        assert!(evolve_two_level(&zero).unwrap().iter().all(|&p| p == 0.0));
        let rot = TwoLevelModel::new(times.clone(), vec![0.8; 21], vec![0.0; 21]).unwrap();
        let p = evolve_two_level(&rot).unwrap();
        for (t, pk) in times.iter().zip(&p) {
            assert!((pk - (0.8 * t).sin().powi(2)).abs() < 1e-9);
        }
    }

    #[test]
    fn single_atom_coupling_is_landau_zener() {
        let p = PhysicalParams::experiment();
        let s = standard_schedule(&p).unwrap();
        let h = single_atom();
        let prof = scan_gap_with(&h, &s, &ScanOptions { n_samples: 33, store_vectors: true, ..Default::default() }).unwrap();
        let m = build_two_level_model(&h, &s, &prof).unwrap();
        let rate = s.delta_rate(2.0);
        for (k, smp) in prof.samples.iter().enumerate().skip(1).take(30) {
            let expect = rate * p.omega0 / (2.0 * (p.omega0.powi(2) + smp.delta.powi(2)));
            assert!((m.coupling[k].abs() - expect).abs() < 1e-9, "{k}");
        }
    }

    #[test]
    fn state_file_round_trip() {
        let p = PhysicalParams::experiment();
        let g = blockade_graph(&builtin_instance("Q1D_4").unwrap(), &p).unwrap();
        let h = HamiltonianTerms::build(&g, BasisKind::Blockade, InteractionModel::default()).unwrap();
        let amps: Vec<C64> = (0..h.dim()).map(|i| C64::new(i as f64, -(i as f64) / 2.0)).collect();
        let psi = QuantumState::new(h.basis().clone(), amps).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.json");
        psi.save(&path).unwrap();
        let back = QuantumState::load(&path).unwrap();
        assert_eq!(back.amplitudes(), psi.amplitudes());
        assert_eq!(back.basis().states(), psi.basis().states());
    }
}
