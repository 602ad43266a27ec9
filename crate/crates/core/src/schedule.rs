//! Pulse schedules Ω(t), δ(t) on [0, T].
//!
//! Ω is always the trapezoid 0 → Ω0 → 0 with ramps of length t_r. δ is a
//! breakpoint table with linear interpolation, held at δ_i during the first
//! ramp and at δ_f during the last.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PhysicalParams;
use crate::spectrum::GapProfile;
use crate::units::{mhz, to_mhz};

/// Sweep resolution of synthesized schedules.
pub const SWEEP_BREAKPOINTS: usize = 1000;

/// Default exponent for gap-guided schedules.
pub const DEFAULT_J: f64 = 1.8;

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum ScheduleKind {
    Standard,
    /// Gap-guided sweep with exponent `j` through the waypoint (t_min, δ_min).
    Adglb { j: f64, t_min: f64, delta_min: f64 },
    /// Polynomial template shifted by the waypoint offset ν_d.
    Transfer { nu_d: f64, t_min: f64, delta_min: f64 },
    /// Imported or hand-built table.
    Custom,
}

impl ScheduleKind {
    pub fn label(&self) -> String {
        match self {
            Self::Standard => "standard".into(),
            Self::Adglb { j, .. } => format!("adglb(j={j})"),
            Self::Transfer { nu_d, .. } => format!("transfer(nu_d={:.4} MHz)", to_mhz(*nu_d)),
            Self::Custom => "custom".into(),
        }
    }

    /// Waypoint (t_min, δ_min) of the two-piece sweeps.
    pub fn waypoint(&self) -> Option<(f64, f64)> {
        match *self {
            Self::Adglb { t_min, delta_min, .. } | Self::Transfer { t_min, delta_min, .. } => Some((t_min, delta_min)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseSchedule {
    kind: ScheduleKind,
    ramp_time: f64,
    total_time: f64,
    omega0: f64,
    points: Vec<(f64, f64)>,
}

impl PulseSchedule {
    /// Validates and wraps a δ breakpoint table. `points` must start at t = 0,
    /// end at t = T, and contain t_r and T − t_r.
    pub fn new(kind: ScheduleKind, ramp_time: f64, total_time: f64, omega0: f64, points: Vec<(f64, f64)>) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidSchedule(msg));
        if !(omega0 > 0.0 && ramp_time > 0.0 && total_time > 2.0 * ramp_time) {
            return bad(format!("need omega0 > 0 and T > 2 t_r > 0 (t_r = {ramp_time}, T = {total_time})"));
        }
        if points.len() < 2 || points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return bad("breakpoint table must hold at least two finite points".into());
        }
        if points[0].0 != 0.0 || (points.last().unwrap().0 - total_time).abs() > TIME_EPS {
            return bad("breakpoints must span [0, T]".into());
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return bad(format!("breakpoint times not increasing at t = {}", w[1].0));
            }
            if w[1].1 < w[0].1 {
                return bad(format!("detuning decreases at t = {}", w[1].0));
            }
        }
        let (d_i, d_f) = (points[0].1, points.last().unwrap().1);
        for &(t, d) in &points {
            let held = (t <= ramp_time + TIME_EPS && d != d_i) || (t >= total_time - ramp_time - TIME_EPS && d != d_f);
            if held {
                return bad(format!("detuning must be held constant during the ramps (t = {t})"));
            }
        }
        for edge in [ramp_time, total_time - ramp_time] {
            if !points.iter().any(|p| (p.0 - edge).abs() <= TIME_EPS) {
                return bad(format!("missing breakpoint at t = {edge}"));
            }
        }
        let mut points = points;
        points.last_mut().unwrap().0 = total_time;
        Ok(Self { kind, ramp_time, total_time, omega0, points })
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn ramp_time(&self) -> f64 {
        self.ramp_time
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn delta_i(&self) -> f64 {
        self.points[0].1
    }

    pub fn delta_f(&self) -> f64 {
        self.points.last().unwrap().1
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn sweep_window(&self) -> (f64, f64) {
        (self.ramp_time, self.total_time - self.ramp_time)
    }

    pub fn breakpoint_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.0)
    }

    pub fn omega(&self, t: f64) -> f64 {
        let (t_r, t_end) = (self.ramp_time, self.total_time);
        if t <= 0.0 || t >= t_end {
            0.0
        } else if t < t_r {
            self.omega0 * t / t_r
        } else if t > t_end - t_r {
            self.omega0 * (t_end - t) / t_r
        } else {
            self.omega0
        }
    }

    /// Right-hand derivative of Ω (left-hand at t = T).
    pub fn omega_rate(&self, t: f64) -> f64 {
        let r = self.omega0 / self.ramp_time;
        if t < 0.0 || t > self.total_time {
            0.0
        } else if t < self.ramp_time {
            r
        } else if t >= self.total_time - self.ramp_time {
            -r
        } else {
            0.0
        }
    }

    pub fn delta(&self, t: f64) -> f64 {
        let k = self.segment(t);
        let (t0, d0) = self.points[k];
        let (t1, d1) = self.points[k + 1];
        let x = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        d0 + (d1 - d0) * x
    }

    /// Right-hand derivative of δ (left-hand at t = T).
    pub fn delta_rate(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.total_time {
            return 0.0;
        }
        let k = self.segment(t);
        let (t0, d0) = self.points[k];
        let (t1, d1) = self.points[k + 1];
        (d1 - d0) / (t1 - t0)
    }

    /// Index of the segment [t_k, t_{k+1}) containing t.
    fn segment(&self, t: f64) -> usize {
        let k = self.points.partition_point(|p| p.0 <= t);
        k.saturating_sub(1).min(self.points.len() - 2)
    }

    /// Same schedule with every detuning shifted by `offset`.
    pub fn with_detuning_offset(&self, offset: f64) -> Self {
        let mut s = self.clone();
        s.points.iter_mut().for_each(|p| p.1 += offset);
        s
    }

    pub fn to_file(&self) -> ScheduleFile {
        ScheduleFile {
            t_r_us: self.ramp_time,
            total_time_us: self.total_time,
            omega0_over_2pi_mhz: to_mhz(self.omega0),
            points: self.points.iter().map(|&(t, d)| SchedulePoint { t_us: t, delta_over_2pi_mhz: to_mhz(d) }).collect(),
            kind: KindFile::from(self.kind),
        }
    }

    pub fn from_file(f: &ScheduleFile) -> Result<Self> {
        let points = f.points.iter().map(|p| (p.t_us, mhz(p.delta_over_2pi_mhz))).collect();
        Self::new(f.kind.to_kind(), f.t_r_us, f.total_time_us, mhz(f.omega0_over_2pi_mhz), points)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(&serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Piecewise-linear amplitude/detuning/phase program in SI units (s, rad/s).
    pub fn to_ahs_program(&self) -> AhsProgram {
        let (t_r, t_end) = (self.ramp_time, self.total_time);
        let series = |pts: Vec<(f64, f64)>| TimeSeries {
            times_s: pts.iter().map(|p| p.0 / 1e6).collect(),
            values: pts.iter().map(|p| p.1 * 1e6).collect(),
        };
        AhsProgram {
            amplitude: series(vec![(0.0, 0.0), (t_r, self.omega0), (t_end - t_r, self.omega0), (t_end, 0.0)]),
            detuning: series(self.points.clone()),
            phase: series(vec![(0.0, 0.0), (t_end, 0.0)]),
        }
    }

    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "t_us,omega_over_2pi_MHz,delta_over_2pi_MHz")?;
        for &(t, d) in &self.points {
            writeln!(out, "{t:.9},{:.9},{:.9}", to_mhz(self.omega(t)), to_mhz(d))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulePoint {
    pub t_us: f64,
    #[serde(rename = "delta_over_2pi_MHz")]
    pub delta_over_2pi_mhz: f64,
}

/// On-disk schedule, frequencies as value/2π in MHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleFile {
    pub t_r_us: f64,
    #[serde(rename = "T_us")]
    pub total_time_us: f64,
    #[serde(rename = "omega0_over_2pi_MHz")]
    pub omega0_over_2pi_mhz: f64,
    pub points: Vec<SchedulePoint>,
    pub kind: KindFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindFile {
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<f64>,
    #[serde(default, rename = "nu_d_over_2pi_MHz", skip_serializing_if = "Option::is_none")]
    pub nu_d_over_2pi_mhz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_min_us: Option<f64>,
    #[serde(default, rename = "delta_min_over_2pi_MHz", skip_serializing_if = "Option::is_none")]
    pub delta_min_over_2pi_mhz: Option<f64>,
}

impl From<ScheduleKind> for KindFile {
    fn from(k: ScheduleKind) -> Self {
        let mut f = KindFile { method: String::new(), j: None, nu_d_over_2pi_mhz: None, t_min_us: None, delta_min_over_2pi_mhz: None };
        f.method = match k {
            ScheduleKind::Standard => "standard",
            ScheduleKind::Adglb { j, .. } => {
                f.j = Some(j);
                "adglb"
            }
            ScheduleKind::Transfer { nu_d, .. } => {
                f.nu_d_over_2pi_mhz = Some(to_mhz(nu_d));
                "transfer"
            }
            ScheduleKind::Custom => "custom",
        }
        .into();
        if let Some((t, d)) = k.waypoint() {
            f.t_min_us = Some(t);
            f.delta_min_over_2pi_mhz = Some(to_mhz(d));
        }
        f
    }
}

impl KindFile {
    fn to_kind(&self) -> ScheduleKind {
        let waypoint = self.t_min_us.zip(self.delta_min_over_2pi_mhz.map(mhz));
        match (self.method.as_str(), waypoint) {
            ("standard", _) => ScheduleKind::Standard,
            ("adglb", Some((t_min, delta_min))) => ScheduleKind::Adglb { j: self.j.unwrap_or(f64::NAN), t_min, delta_min },
            ("transfer", Some((t_min, delta_min))) => {
                ScheduleKind::Transfer { nu_d: mhz(self.nu_d_over_2pi_mhz.unwrap_or(0.0)), t_min, delta_min }
            }
            _ => ScheduleKind::Custom,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub times_s: Vec<f64>,
    pub values: Vec<f64>,
}

/// Generic analog-hardware waveform program. Amplitude and detuning values
/// are in rad/s, phase in rad.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AhsProgram {
    pub amplitude: TimeSeries,
    pub detuning: TimeSeries,
    pub phase: TimeSeries,
}

/// Three-stage schedule: Ω ramp at δ_i, linear δ sweep at Ω0, Ω ramp-down at δ_f.
pub fn standard_schedule(p: &PhysicalParams) -> Result<PulseSchedule> {
    p.validate()?;
    let (t_r, t_end) = (p.ramp_time, p.total_time);
    PulseSchedule::new(
        ScheduleKind::Standard,
        t_r,
        t_end,
        p.omega0,
        vec![(0.0, p.delta_i), (t_r, p.delta_i), (t_end - t_r, p.delta_f), (t_end, p.delta_f)],
    )
}

/// ζ_j(t) = ∫_{t0}^{t} gap^j / ∫_{t0}^{t1} gap^j with the gap interpolated
/// linearly between profile samples and integrated by the trapezoid rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Zeta {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl Zeta {
    pub fn t0(&self) -> f64 {
        self.nodes[0]
    }

    pub fn t1(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= self.t0() {
            return 0.0;
        }
        if t >= self.t1() {
            return 1.0;
        }
        let k = self.nodes.partition_point(|&x| x <= t) - 1;
        let (ta, tb) = (self.nodes[k], self.nodes[k + 1]);
        let x = (t - ta) / (tb - ta);
        let wt = self.weights[k] + (self.weights[k + 1] - self.weights[k]) * x;
        self.cumulative[k] + 0.5 * (self.weights[k] + wt) * (t - ta)
    }
}

pub fn zeta_interpolant(profile: &GapProfile, j: f64, t0: f64, t1: f64) -> Result<Zeta> {
    let (lo, hi) = profile.time_range();
    if !(t1 > t0) || t0 < lo - TIME_EPS || t1 > hi + TIME_EPS {
        return Err(Error::EmptyInterval { t0, t1 });
    }
    if !(j > 0.0) {
        return Err(Error::InvalidParams(format!("exponent j must be positive, got {j}")));
    }
    let mut nodes = vec![t0];
    nodes.extend(profile.knot_times().filter(|&t| t > t0 + TIME_EPS && t < t1 - TIME_EPS));
    nodes.push(t1);
    let weights: Vec<f64> = nodes.iter().map(|&t| profile.gap_at(t).max(0.0).powf(j)).collect();
    let mut cumulative = vec![0.0];
    for k in 0..nodes.len() - 1 {
        cumulative.push(cumulative[k] + 0.5 * (weights[k] + weights[k + 1]) * (nodes[k + 1] - nodes[k]));
    }
    let total = *cumulative.last().unwrap();
    if !(total > 0.0) {
        return Err(Error::ZeroDenominator { t0, t1 });
    }
    let weights = weights.iter().map(|w| w / total).collect();
    let cumulative = cumulative.iter().map(|c| c / total).collect();
    Ok(Zeta { nodes, weights, cumulative })
}

/// Gap-guided schedule: δ rises from δ_i to δ_min on [t_r, t_min] and from
/// δ_min to δ_f on [t_min, T − t_r], each piece following its own ζ_j.
pub fn adglb_schedule(p: &PhysicalParams, profile: &GapProfile, j: f64) -> Result<PulseSchedule> {
    p.validate()?;
    profile.check_params(p)?;
    let (t_r, t_end) = (p.ramp_time, p.total_time);
    let (s0, s1) = (t_r, t_end - t_r);
    let (t_min, delta_min) = (profile.t_min, profile.delta_min);
    if !(t_min > s0 && t_min < s1) {
        return Err(Error::ProfileMismatch(format!("t_min = {t_min} us lies outside the sweep ({s0}, {s1})")));
    }
    if !(delta_min > p.delta_i && delta_min < p.delta_f) {
        return Err(Error::ProfileMismatch(format!("delta_min = {delta_min} lies outside (delta_i, delta_f)")));
    }
    let za = zeta_interpolant(profile, j, s0, t_min)?;
    let zb = zeta_interpolant(profile, j, t_min, s1)?;
    let delta = |t: f64| {
        if t <= t_min {
            p.delta_i + (delta_min - p.delta_i) * za.eval(t)
        } else {
            delta_min + (p.delta_f - delta_min) * zb.eval(t)
        }
    };
    let points = sweep_table(t_r, t_end, Some(t_min), p.delta_i, p.delta_f, |t| {
        if (t - t_min).abs() <= TIME_EPS {
            delta_min
        } else {
            delta(t)
        }
    });
    PulseSchedule::new(ScheduleKind::Adglb { j, t_min, delta_min }, t_r, t_end, p.omega0, points)
}

/// Breakpoint table: (0, δ_i), a uniform sweep grid on [t_r, T − t_r] plus an
/// optional waypoint, (T, δ_f).
fn sweep_table(t_r: f64, t_end: f64, waypoint: Option<f64>, d_i: f64, d_f: f64, f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
    let (s0, s1) = (t_r, t_end - t_r);
    let mut times: Vec<f64> = (0..SWEEP_BREAKPOINTS).map(|k| s0 + (s1 - s0) * k as f64 / (SWEEP_BREAKPOINTS - 1) as f64).collect();
    if let Some(w) = waypoint {
        times.retain(|t| (t - w).abs() > 1e-6);
        let k = times.partition_point(|&t| t < w);
        times.insert(k, w);
    }
    let mut points = vec![(0.0, d_i)];
    points.extend(times.iter().map(|&t| {
        if t == s0 {
            (t, d_i)
        } else if t == s1 {
            (t, d_f)
        } else {
            (t, f(t))
        }
    }));
    points.push((t_end, d_f));
    points
}

/// Quartic, zero-constant polynomial templates of the two sweep pieces.
/// Inputs in μs (time since the piece start), outputs in MHz (value/2π).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaPolynomials {
    /// Coefficients of s, s², s³, s⁴ for the rise to the waypoint.
    pub a: [f64; 4],
    /// Coefficients of s, s², s³, s⁴ for the rise past the waypoint.
    pub b: [f64; 4],
}

impl EtaPolynomials {
    /// Published template for the 10-atom chain.
    pub const PUBLISHED: Self = Self { a: [4.0047, -1.5785, 0.2826, -0.0193], b: [0.5509, -0.055, 1.4402, -0.565] };

    pub fn eta_a(&self, s: f64) -> f64 {
        poly(&self.a, s)
    }

    pub fn eta_b(&self, s: f64) -> f64 {
        poly(&self.b, s)
    }
}

fn poly(c: &[f64; 4], s: f64) -> f64 {
    s * (c[0] + s * (c[1] + s * (c[2] + s * c[3])))
}

/// Schedule the polynomial template was fitted to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferBaseline {
    pub eta: EtaPolynomials,
    pub t_min: f64,
    pub delta_min: f64,
}

impl Default for TransferBaseline {
    fn default() -> Self {
        Self { eta: EtaPolynomials::PUBLISHED, t_min: 3.60, delta_min: mhz(1.38) }
    }
}

/// Template schedule with its waypoint detuning moved by `nu_d`.
pub fn transfer_schedule(p: &PhysicalParams, nu_d: f64) -> Result<PulseSchedule> {
    transfer_schedule_with(p, nu_d, &TransferBaseline::default())
}

/// Piece A scales η_A by (δ′_min − δ_i)/(δ_min,0 − δ_i), piece B scales η_B by
/// (δ_f − δ′_min)/(δ_f − δ_min,0). Each piece is capped at its end value so
/// the template's small endpoint residuals cannot break monotonicity.
pub fn transfer_schedule_with(p: &PhysicalParams, nu_d: f64, base: &TransferBaseline) -> Result<PulseSchedule> {
    p.validate()?;
    let (t_r, t_end) = (p.ramp_time, p.total_time);
    let t_min = base.t_min;
    if !(t_min > t_r && t_min < t_end - t_r) {
        return Err(Error::InvalidParams(format!("template t_min = {t_min} us lies outside the sweep")));
    }
    let d_min = base.delta_min + nu_d;
    if !(d_min > p.delta_i && d_min < p.delta_f) {
        return Err(Error::InvalidOffset { delta_min: d_min, delta_i: p.delta_i, delta_f: p.delta_f });
    }
    let scale_a = (d_min - p.delta_i) / (base.delta_min - p.delta_i);
    let scale_b = (p.delta_f - d_min) / (p.delta_f - base.delta_min);
    let delta = |t: f64| {
        if (t - t_min).abs() <= TIME_EPS {
            d_min
        } else if t < t_min {
            (p.delta_i + scale_a * mhz(base.eta.eta_a(t - t_r))).min(d_min)
        } else {
            (d_min + scale_b * mhz(base.eta.eta_b(t - t_min))).min(p.delta_f)
        }
    };
    let points = sweep_table(t_r, t_end, Some(t_min), p.delta_i, p.delta_f, delta);
    PulseSchedule::new(ScheduleKind::Transfer { nu_d, t_min, delta_min: d_min }, t_r, t_end, p.omega0, points)
}

/// Least-squares quartic fits (no constant term) of the two sweep pieces of
/// a waypoint schedule, sampled at its breakpoints.
pub fn fit_eta_polynomials(sched: &PulseSchedule) -> Result<EtaPolynomials> {
    let (t_min, d_min) = sched
        .kind()
        .waypoint()
        .ok_or_else(|| Error::InvalidSchedule("fit needs a schedule with a (t_min, delta_min) waypoint".into()))?;
    let (s0, s1) = sched.sweep_window();
    let d_i = sched.delta_i();
    let piece = |lo: f64, hi: f64, base: f64| -> Result<[f64; 4]> {
        let data: Vec<(f64, f64)> = sched
            .points()
            .iter()
            .filter(|p| p.0 >= lo - TIME_EPS && p.0 <= hi + TIME_EPS)
            .map(|&(t, d)| (t - lo, to_mhz(d - base)))
            .collect();
        fit_quartic(&data)
    };
    Ok(EtaPolynomials { a: piece(s0, t_min, d_i)?, b: piece(t_min, s1, d_min)? })
}

fn fit_quartic(data: &[(f64, f64)]) -> Result<[f64; 4]> {
    if data.len() < 4 {
        return Err(Error::RankDeficient(format!("{} samples for 4 coefficients", data.len())));
    }
    let a = DMatrix::from_fn(data.len(), 4, |i, k| data[i].0.powi(k as i32 + 1));
    let y = DVector::from_iterator(data.len(), data.iter().map(|d| d.1));
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::RankDeficient(format!("singular values {smin:.3e} / {smax:.3e}")));
    }
    let x = svd.solve(&y, 1e-14 * smax).map_err(|e| Error::RankDeficient(e.into()))?;
    Ok([x[0], x[1], x[2], x[3]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::GapProfile;

    fn params() -> PhysicalParams {
        PhysicalParams::experiment()
    }

    #[test]
    fn standard_values() {
        let p = params();
        let s = standard_schedule(&p).unwrap();
        assert!(s.delta(2.5).abs() < 1e-12);
        assert_eq!(s.delta(0.25), mhz(-2.5));
        assert!((s.omega(p.total_time - p.ramp_time / 2.0) - p.omega0 / 2.0).abs() < 1e-12);
        assert_eq!(s.omega(0.0), 0.0);
        assert_eq!(s.omega(p.total_time), 0.0);
        assert_eq!(s.omega(1.0), p.omega0);
        assert_eq!(s.delta(p.total_time), p.delta_f);
    }

    #[test]
    fn rejects_broken_tables() {
        let p = params();
        let ok = standard_schedule(&p).unwrap();
        let mut pts = ok.points().to_vec();
        pts.swap(1, 2);
        assert!(PulseSchedule::new(ScheduleKind::Custom, 0.5, 5.0, p.omega0, pts).is_err());
        let decreasing = vec![(0.0, 1.0), (0.5, 1.0), (4.5, 0.0), (5.0, 0.0)];
        assert!(PulseSchedule::new(ScheduleKind::Custom, 0.5, 5.0, p.omega0, decreasing).is_err());
        let unheld = vec![(0.0, -1.0), (0.25, -0.5), (0.5, -0.5), (4.5, 1.0), (5.0, 1.0)];
        assert!(PulseSchedule::new(ScheduleKind::Custom, 0.5, 5.0, p.omega0, unheld).is_err());
    }

    #[test]
    fn constant_gap_zeta_is_linear() {
        let prof = GapProfile::synthetic(&params(), |_| 2.0, 3.1, mhz(1.0));
        for j in [0.5, 1.0, 1.8] {
            let z = zeta_interpolant(&prof, j, 1.0, 4.0).unwrap();
            assert_eq!(z.eval(1.0), 0.0);
            assert!((z.eval(4.0) - 1.0).abs() < 1e-15);
            for t in [1.3, 2.2, 3.9] {
                assert!((z.eval(t) - (t - 1.0) / 3.0).abs() < 1e-12);
            }
        }
        assert!(matches!(zeta_interpolant(&prof, 1.0, 2.0, 2.0), Err(Error::EmptyInterval { .. })));
        let flat = GapProfile::synthetic(&params(), |_| 0.0, 3.1, mhz(1.0));
        assert!(matches!(zeta_interpolant(&flat, 1.0, 1.0, 2.0), Err(Error::ZeroDenominator { .. })));
    }

    #[test]
    fn adglb_constant_gap_is_piecewise_linear() {
        let p = params();
        let prof = GapProfile::synthetic(&p, |_| 1.0, 2.5, 0.0);
        let s = adglb_schedule(&p, &prof, 1.5).unwrap();
        let std = standard_schedule(&p).unwrap();
        for k in 0..=100 {
            let t = k as f64 * 0.05;
            assert!((s.delta(t) - std.delta(t)).abs() < 1e-9, "{t}");
        }
    }

    #[test]
    fn adglb_slows_near_the_minimum() {
        let p = params();
        let prof = GapProfile::synthetic(&p, |t| 1.0 + (t - 3.0).powi(2), 3.0, mhz(0.8));
        let s = adglb_schedule(&p, &prof, 1.0).unwrap();
        assert_eq!(s.delta(3.0), mhz(0.8));
        assert!(s.delta_rate(3.0) < s.delta_rate(1.0));
        assert!(s.delta_rate(3.0) < s.delta_rate(4.4));
        assert!(matches!(s.kind(), ScheduleKind::Adglb { .. }));
    }

    #[test]
    fn eta_endpoints() {
        let e = EtaPolynomials::PUBLISHED;
        assert_eq!(e.eta_a(0.0), 0.0);
        assert!((e.eta_a(3.1) - 3.88).abs() < 0.01);
        assert!((e.eta_b(0.9) - 1.13).abs() < 0.01);
    }

    #[test]
    fn transfer_offsets() {
        let p = params();
        let s0 = transfer_schedule(&p, 0.0).unwrap();
        assert!((s0.delta(3.6) - mhz(1.38)).abs() < mhz(0.02));
        assert!((s0.delta(4.5) - p.delta_f).abs() < mhz(0.02));
        let s2 = transfer_schedule(&p, mhz(0.2)).unwrap();
        assert!((s2.delta(3.6) - mhz(1.58)).abs() < 1e-12);
        assert!(matches!(transfer_schedule(&p, mhz(1.2)), Err(Error::InvalidOffset { .. })));
        assert!(matches!(transfer_schedule(&p, mhz(-4.0)), Err(Error::InvalidOffset { .. })));
    }

    #[test]
    fn fit_recovers_exact_quartics() {
        let p = params();
        // Piece B chosen so it lands exactly on δ_f at T − t_r.
        let a = [3.0, -0.5, 0.1, -0.01];
        let mut b = [0.4, 0.2, 0.3, 0.0];
        let (t_min, d_min) = (3.2, mhz(1.2));
        let sb = p.total_time - p.ramp_time - t_min;
        b[3] = (to_mhz(p.delta_f - d_min) - poly(&b, sb)) / sb.powi(4);
        let a_end = poly(&a, t_min - p.ramp_time);
        let d_i = d_min - mhz(a_end);
        let pts = sweep_table(p.ramp_time, p.total_time, Some(t_min), d_i, p.delta_f, |t| {
            if t <= t_min {
                d_i + mhz(poly(&a, t - p.ramp_time))
            } else {
                d_min + mhz(poly(&b, t - t_min))
            }
        });
        let kind = ScheduleKind::Adglb { j: 1.0, t_min, delta_min: d_min };
        let s = PulseSchedule::new(kind, p.ramp_time, p.total_time, p.omega0, pts).unwrap();
        let fit = fit_eta_polynomials(&s).unwrap();
        for k in 0..4 {
            assert!((fit.a[k] - a[k]).abs() < 1e-6, "a{k}");
            assert!((fit.b[k] - b[k]).abs() < 1e-6, "b{k}");
        }
    }

    #[test]
    fn fit_rejects_standard_schedule() {
        let s = standard_schedule(&params()).unwrap();
        assert!(fit_eta_polynomials(&s).is_err());
    }

    #[test]
    fn json_round_trip() {
        let p = params();
        let s = transfer_schedule(&p, mhz(0.1)).unwrap();
        let back = PulseSchedule::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back.points().len(), s.points().len());
        for (a, b) in back.points().iter().zip(s.points()) {
            assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
        }
        assert_eq!(back.kind().label(), s.kind().label());
        let text = s.to_json().unwrap();
        assert!(text.contains("\"T_us\"") && text.contains("\"delta_over_2pi_MHz\""));
    }

    #[test]
    fn ahs_program_units() {
        let s = standard_schedule(&params()).unwrap();
        let prog = s.to_ahs_program();
        for (a, b) in prog.amplitude.times_s.iter().zip([0.0, 0.5e-6, 4.5e-6, 5.0e-6]) {
            assert!((a - b).abs() < 1e-18);
        }
        assert!((prog.amplitude.values[1] - 2.0 * std::f64::consts::PI * 1e6).abs() < 1e-3);
        assert_eq!(prog.detuning.values.len(), 4);
    }
}
