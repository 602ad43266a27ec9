//! Instantaneous spectrum along a schedule: the two lowest levels, the gap
//! profile ΔE01(t) and its minimum.

use std::io::Write;
use std::sync::Arc;

use crate::eigen::lowest_eigenpairs;
use crate::error::{Error, Result};
use crate::geometry::PhysicalParams;
use crate::hamiltonian::{BasisSet, HamiltonianTerms, SparseHermitian};
use crate::isets::ISetStats;
use crate::schedule::PulseSchedule;
use crate::units::to_mhz;

/// Golden-section stopping width, μs.
pub const REFINE_TOL_US: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct LowestPair {
    pub e0: f64,
    pub e1: f64,
    pub v0: Vec<f64>,
    pub v1: Vec<f64>,
}

impl LowestPair {
    pub fn gap(&self) -> f64 {
        self.e1 - self.e0
    }
}

pub fn eigenpairs_lowest2(h: &SparseHermitian) -> Result<LowestPair> {
    if h.dim() < 2 {
        return Err(Error::InvalidParams("need dimension >= 2".into()));
    }
    let mut e = lowest_eigenpairs(h, 2)?;
    let v1 = e.vectors.pop().unwrap();
    let v0 = e.vectors.pop().unwrap();
    Ok(LowestPair { e0: e.values[0], e1: e.values[1], v0, v1 })
}

fn lowest2_at(h: &HamiltonianTerms, sched: &PulseSchedule, t: f64) -> Result<LowestPair> {
    eigenpairs_lowest2(&h.assemble(sched.omega(t), sched.delta(t))).map_err(|e| match e {
        Error::EigenNonConvergence { detail, .. } => Error::EigenNonConvergence { t: Some(t), detail },
        other => other,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapSample {
    pub t: f64,
    pub delta: f64,
    pub e0: f64,
    pub e1: f64,
    pub gap: f64,
}

/// Schedule parameters a profile was computed under.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileParams {
    pub ramp_time: f64,
    pub total_time: f64,
    pub omega0: f64,
    pub delta_i: f64,
    pub delta_f: f64,
}

impl ProfileParams {
    fn of(s: &PulseSchedule) -> Self {
        Self {
            ramp_time: s.ramp_time(),
            total_time: s.total_time(),
            omega0: s.omega0(),
            delta_i: s.delta_i(),
            delta_f: s.delta_f(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GapProfile {
    pub samples: Vec<GapSample>,
    pub t_min: f64,
    pub delta_min: f64,
    pub g_min: f64,
    pub params: ProfileParams,
    /// (v0, v1) per sample when requested.
    pub vectors: Option<Vec<(Vec<f64>, Vec<f64>)>>,
    pub basis: Option<Arc<BasisSet>>,
}

impl GapProfile {
    /// Profile from an analytic gap on the standard sweep grid, with a given
    /// minimum location. Energies are e0 = −gap/2, e1 = +gap/2.
    pub fn synthetic(p: &PhysicalParams, gap: impl Fn(f64) -> f64, t_min: f64, delta_min: f64) -> Self {
        let (s0, s1) = p.sweep_window();
        let n = 201;
        let samples = (0..n)
            .map(|k| {
                let t = s0 + (s1 - s0) * k as f64 / (n - 1) as f64;
                let g = gap(t);
                let delta = p.delta_i + (p.delta_f - p.delta_i) * (t - s0) / (s1 - s0);
                GapSample { t, delta, e0: -g / 2.0, e1: g / 2.0, gap: g }
            })
            .collect();
        Self {
            samples,
            t_min,
            delta_min,
            g_min: gap(t_min),
            params: ProfileParams {
                ramp_time: p.ramp_time,
                total_time: p.total_time,
                omega0: p.omega0,
                delta_i: p.delta_i,
                delta_f: p.delta_f,
            },
            vectors: None,
            basis: None,
        }
    }

    pub fn time_range(&self) -> (f64, f64) {
        (self.samples[0].t, self.samples.last().unwrap().t)
    }

    /// Sample times with the refined minimum merged in.
    pub fn knot_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.knots().into_iter().map(|k| k.0)
    }

    fn knots(&self) -> Vec<(f64, f64)> {
        let mut k: Vec<(f64, f64)> = self.samples.iter().map(|s| (s.t, s.gap)).collect();
        let (lo, hi) = self.time_range();
        if self.t_min > lo && self.t_min < hi && !k.iter().any(|x| (x.0 - self.t_min).abs() < 1e-12) {
            let i = k.partition_point(|x| x.0 < self.t_min);
            k.insert(i, (self.t_min, self.g_min));
        }
        k
    }

    /// Gap interpolated linearly through the samples and the refined minimum.
    pub fn gap_at(&self, t: f64) -> f64 {
        let k = self.knots();
        let i = k.partition_point(|x| x.0 <= t);
        if i == 0 {
            return k[0].1;
        }
        if i == k.len() {
            return k[i - 1].1;
        }
        let (a, b) = (k[i - 1], k[i]);
        a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0)
    }

    pub fn check_params(&self, p: &PhysicalParams) -> Result<()> {
        let q = &self.params;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()));
        let ok = close(q.ramp_time, p.ramp_time)
            && close(q.total_time, p.total_time)
            && close(q.omega0, p.omega0)
            && close(q.delta_i, p.delta_i)
            && close(q.delta_f, p.delta_f);
        if ok {
            Ok(())
        } else {
            Err(Error::ProfileMismatch(format!("profile computed with {q:?}")))
        }
    }

    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "t_us,delta_over_2pi_MHz,e0,e1,gap")?;
        for s in &self.samples {
            writeln!(
                out,
                "{:.9},{:.9},{:.9},{:.9},{:.9}",
                s.t,
                to_mhz(s.delta),
                to_mhz(s.e0),
                to_mhz(s.e1),
                to_mhz(s.gap)
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScanWindow {
    /// Uniform samples on [t_r, T − t_r].
    #[default]
    Sweep,
    /// Uniform samples on [0, T].
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    pub n_samples: usize,
    pub window: ScanWindow,
    pub store_vectors: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { n_samples: 200, window: ScanWindow::Sweep, store_vectors: false }
    }
}

pub fn scan_gap(h: &HamiltonianTerms, sched: &PulseSchedule, n_samples: usize) -> Result<GapProfile> {
    scan_gap_with(h, sched, &ScanOptions { n_samples, ..Default::default() })
}

/// Coarse scan, then golden-section refinement of the smallest interior
/// sweep sample.
pub fn scan_gap_with(h: &HamiltonianTerms, sched: &PulseSchedule, opts: &ScanOptions) -> Result<GapProfile> {
    if opts.n_samples < 16 {
        return Err(Error::InvalidParams(format!("need at least 16 samples, got {}", opts.n_samples)));
    }
    if h.dim() < 2 {
        return Err(Error::InvalidParams("need basis dimension >= 2".into()));
    }
    let (s0, s1) = sched.sweep_window();
    let (w0, w1) = match opts.window {
        ScanWindow::Sweep => (s0, s1),
        ScanWindow::Full => (0.0, sched.total_time()),
    };
    let n = opts.n_samples;
    let mut samples = Vec::with_capacity(n);
    let mut vectors = opts.store_vectors.then(|| Vec::with_capacity(n));
    for k in 0..n {
        let t = if k == n - 1 { w1 } else { w0 + (w1 - w0) * k as f64 / (n - 1) as f64 };
        let lp = lowest2_at(h, sched, t)?;
        samples.push(GapSample { t, delta: sched.delta(t), e0: lp.e0, e1: lp.e1, gap: lp.gap().max(0.0) });
        if let Some(v) = vectors.as_mut() {
            v.push((lp.v0, lp.v1));
        }
    }

    let interior: Vec<usize> = (0..n).filter(|&k| samples[k].t > s0 && samples[k].t < s1).collect();
    let &kmin = interior
        .iter()
        .min_by(|&&a, &&b| samples[a].gap.total_cmp(&samples[b].gap))
        .ok_or_else(|| Error::InvalidParams("no samples inside the sweep".into()))?;
    let lo = if kmin > 0 { samples[kmin - 1].t.max(s0) } else { s0 };
    let hi = if kmin + 1 < n { samples[kmin + 1].t.min(s1) } else { s1 };
    let gap = |t: f64| lowest2_at(h, sched, t).map(|lp| lp.gap());
    let (mut t_min, mut g_min) = golden_section(gap, lo, hi, REFINE_TOL_US)?;
    if samples[kmin].gap < g_min {
        t_min = samples[kmin].t;
        g_min = samples[kmin].gap;
    }
    Ok(GapProfile {
        samples,
        t_min,
        delta_min: sched.delta(t_min),
        g_min,
        params: ProfileParams::of(sched),
        vectors,
        basis: Some(h.basis().clone()),
    })
}

fn golden_section(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc <= fd { (c, fc) } else { (d, fd) })
}

/// Reference state for overlap series.
#[derive(Debug, Clone, PartialEq)]
pub enum MisReference {
    /// One computational-basis configuration.
    Single(u64),
    /// Uniform superposition over the MIS manifold.
    Manifold(Vec<u64>),
}

impl MisReference {
    /// Single configuration when the MIS is unique, manifold otherwise.
    pub fn from_stats(stats: &ISetStats) -> Result<Self> {
        let sets = stats.mis_support()?;
        Ok(match sets.as_slice() {
            [one] => Self::Single(one.mask()),
            _ => Self::Manifold(sets.iter().map(|b| b.mask()).collect()),
        })
    }

    pub fn configs(&self) -> &[u64] {
        match self {
            Self::Single(c) => std::slice::from_ref(c),
            Self::Manifold(cs) => cs,
        }
    }

    /// |⟨MIS|v⟩|² for a real vector on `basis`.
    pub fn overlap_real(&self, basis: &BasisSet, v: &[f64]) -> f64 {
        let cs = self.configs();
        let amp: f64 = cs.iter().filter_map(|&c| basis.position(c)).map(|i| v[i]).sum();
        amp * amp / cs.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapSample {
    pub t: f64,
    pub o0: f64,
    pub o1: f64,
}

pub fn track_mis_overlap(profile: &GapProfile, mis: &MisReference) -> Result<Vec<OverlapSample>> {
    let (vecs, basis) = profile.vectors.as_ref().zip(profile.basis.as_ref()).ok_or(Error::MissingEigenvectors)?;
    Ok(profile
        .samples
        .iter()
        .zip(vecs)
        .map(|(s, (v0, v1))| OverlapSample { t: s.t, o0: mis.overlap_real(basis, v0), o1: mis.overlap_real(basis, v1) })
        .collect())
}

pub fn write_overlap_csv(series: &[OverlapSample], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "t_us,overlap_e0,overlap_e1")?;
    for s in series {
        writeln!(out, "{:.9},{:.12},{:.12}", s.t, s.o0, s.o1)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{blockade_graph, builtin_instance, BlockadeGraph};
    use crate::hamiltonian::{BasisKind, InteractionModel};
    use crate::schedule::standard_schedule;
    use crate::units::mhz;

    fn single_atom() -> HamiltonianTerms {
        let g = BlockadeGraph::from_edges(1, &[], 0.0).unwrap();
        HamiltonianTerms::build(&g, BasisKind::Full, InteractionModel::default()).unwrap()
    }

    #[test]
    fn single_atom_avoided_crossing() {
        let p = PhysicalParams::experiment();
        let s = standard_schedule(&p).unwrap();
        let prof = scan_gap(&single_atom(), &s, 41).unwrap();
        for x in &prof.samples {
            let expect = (p.omega0.powi(2) + x.delta.powi(2)).sqrt();
            assert!((x.gap - expect).abs() < 1e-10);
        }
        assert!((prof.g_min - p.omega0).abs() < 1e-9);
        assert!((prof.t_min - 2.5).abs() < 1e-3);
        assert!(prof.delta_min.abs() < 1e-2);
        assert!(prof.g_min <= prof.samples.iter().map(|s| s.gap).fold(f64::INFINITY, f64::min));
    }

    #[test]
    fn lowest2_of_diagonal() {
        let h = SparseHermitian::from_upper_triplets(2, &[(0, 0, 1.0), (1, 1, 3.0)]);
        let lp = eigenpairs_lowest2(&h).unwrap();
        assert_eq!((lp.e0, lp.e1), (1.0, 3.0));
        assert_eq!(lp.v0, vec![1.0, 0.0]);
        assert_eq!(lp.v1, vec![0.0, 1.0]);
    }

    #[test]
    fn rejects_coarse_scans() {
        let s = standard_schedule(&PhysicalParams::experiment()).unwrap();
        assert!(scan_gap(&single_atom(), &s, 15).is_err());
    }

    #[test]
    fn overlap_needs_vectors() {
        let s = standard_schedule(&PhysicalParams::experiment()).unwrap();
        let prof = scan_gap(&single_atom(), &s, 16).unwrap();
        assert!(matches!(track_mis_overlap(&prof, &MisReference::Single(1)), Err(Error::MissingEigenvectors)));
    }

    #[test]
    fn initial_overlap_vanishes() {
        let p = PhysicalParams::experiment();
        let g = blockade_graph(&builtin_instance("Q1D_4").unwrap(), &p).unwrap();
        let h = HamiltonianTerms::build(&g, BasisKind::Full, InteractionModel::default()).unwrap();
        let s = standard_schedule(&p).unwrap();
        let opts = ScanOptions { n_samples: 16, window: ScanWindow::Full, store_vectors: true };
        let prof = scan_gap_with(&h, &s, &opts).unwrap();
        let stats = crate::isets::count_isets(&g, 0).unwrap();
        let mis = MisReference::from_stats(&stats).unwrap();
        let series = track_mis_overlap(&prof, &mis).unwrap();
        assert!(series[0].o0 < 1e-12);
        assert!((series.last().unwrap().o0 - 1.0).abs() < 1e-9);
        let mut csv = Vec::new();
        prof.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 17);
        assert!(prof.t_min > p.ramp_time && prof.t_min < p.total_time - p.ramp_time);
        assert!(prof.delta_min > mhz(-2.5));
    }
}
