//! Projective readout: Born sampling, the SPAM bit-flip channel and
//! histograms grouped by independent-set class.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::bits::{lex_key, Bitstring};
use crate::dynamics::{evolve, EvolveOptions, QuantumState};
use crate::error::{Error, Result};
use crate::geometry::BlockadeGraph;
use crate::hamiltonian::HamiltonianTerms;
use crate::isets::{classify_mask, count_isets};
use crate::schedule::PulseSchedule;
use crate::units::{mhz, to_mhz};

/// Standard deviation of the global detuning offset, when enabled.
pub fn default_detuning_sigma() -> f64 {
    mhz(0.16)
}

/// Independent per-atom readout flips.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpamModel {
    /// Probability of reading g for an atom in r.
    pub p_g_given_r: f64,
    /// Probability of reading r for an atom in g.
    pub p_r_given_g: f64,
}

impl SpamModel {
    pub fn experiment() -> Self {
        Self { p_g_given_r: 0.10, p_r_given_g: 0.05 }
    }

    pub fn new(p_g_given_r: f64, p_r_given_g: f64) -> Result<Self> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if !ok(p_g_given_r) || !ok(p_r_given_g) {
            return Err(Error::InvalidParams(format!("SPAM rates must lie in [0, 1], got ({p_g_given_r}, {p_r_given_g})")));
        }
        Ok(Self { p_g_given_r, p_r_given_g })
    }

    pub fn apply(&self, mask: u64, n: usize, rng: &mut impl Rng) -> u64 {
        let mut out = mask;
        for v in 0..n {
            let bit = 1u64 << v;
            let p = if mask & bit != 0 { self.p_g_given_r } else { self.p_r_given_g };
            if p > 0.0 && rng.random::<f64>() < p {
                out ^= bit;
            }
        }
        out
    }
}

impl Default for SpamModel {
    fn default() -> Self {
        Self::experiment()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShotHistogram {
    pub n_atoms: usize,
    pub counts: BTreeMap<u64, u64>,
    pub n_shots: u64,
    pub seed: u64,
    pub spam: Option<SpamModel>,
    /// Global detuning offsets drawn per batch, rad/μs.
    pub detuning_offsets: Vec<f64>,
}

impl ShotHistogram {
    fn empty(n_atoms: usize, seed: u64, spam: Option<SpamModel>) -> Self {
        Self { n_atoms, counts: BTreeMap::new(), n_shots: 0, seed, spam, detuning_offsets: Vec::new() }
    }

    fn push(&mut self, mask: u64) {
        *self.counts.entry(mask).or_default() += 1;
        self.n_shots += 1;
    }

    /// Fraction of shots on maximum independent sets.
    pub fn p_mis(&self, g: &BlockadeGraph) -> Result<f64> {
        Ok(histogram_report(self, g)?.classes.mis.probability)
    }
}

/// Draws `n` readouts of `state`.
pub fn sample_shots(state: &QuantumState, n: u64, spam: Option<&SpamModel>, seed: u64) -> Result<ShotHistogram> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hist = ShotHistogram::empty(state.basis().n_atoms(), seed, spam.copied());
    draw_into(&mut hist, state, n, spam, &mut rng)?;
    Ok(hist)
}

fn draw_into(hist: &mut ShotHistogram, state: &QuantumState, n: u64, spam: Option<&SpamModel>, rng: &mut ChaCha8Rng) -> Result<()> {
    let dist = WeightedIndex::new(state.probabilities()).map_err(|e| Error::InvalidParams(format!("state cannot be sampled: {e}")))?;
    let states = state.basis().states();
    let n_atoms = state.basis().n_atoms();
    for _ in 0..n {
        let mut mask = states[dist.sample(rng)];
        if let Some(s) = spam {
            mask = s.apply(mask, n_atoms, rng);
        }
        hist.push(mask);
    }
    Ok(())
}

/// Shots from `batches` evolutions, each under one Gaussian global detuning
/// offset of standard deviation `sigma`.
#[allow(clippy::too_many_arguments)]
pub fn sample_with_detuning_noise(
    h: &HamiltonianTerms,
    sched: &PulseSchedule,
    opts: &EvolveOptions,
    spam: Option<&SpamModel>,
    sigma: f64,
    n_shots: u64,
    batches: u64,
    seed: u64,
) -> Result<ShotHistogram> {
    if batches == 0 {
        return Err(Error::InvalidParams("need at least one batch".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParams(e.to_string()))?;
    let mut hist = ShotHistogram::empty(h.graph().n(), seed, spam.copied());
    for b in 0..batches {
        let offset = normal.sample(&mut rng);
        hist.detuning_offsets.push(offset);
        let res = evolve(h, &sched.with_detuning_offset(offset), opts)?;
        let shots = n_shots / batches + u64::from(b < n_shots % batches);
        draw_into(&mut hist, &res.final_state, shots, spam, &mut rng)?;
    }
    Ok(hist)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassTotal {
    pub count: u64,
    pub probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassTotals {
    pub mis: ClassTotal,
    pub mis_minus_1: ClassTotal,
    pub other_independent: ClassTotal,
    pub non_independent: ClassTotal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub bitstring: String,
    pub count: u64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpamReport {
    pub p_g_given_r: f64,
    pub p_r_given_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramReport {
    pub n_atoms: usize,
    pub n_shots: u64,
    pub seed: u64,
    pub spam: Option<SpamReport>,
    #[serde(skip_serializing_if = "Vec::is_empty", default, rename = "detuning_offsets_over_2pi_MHz")]
    pub detuning_offsets: Vec<f64>,
    pub mis_size: usize,
    pub classes: ClassTotals,
    pub mis_bars: Vec<Bar>,
    pub mis_minus_1_bars: Vec<Bar>,
}

impl HistogramReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Groups shots into MIS, |MIS|−1, other independent and non-independent;
/// bars of the first two classes are sorted by probability, then bitstring.
pub fn histogram_report(h: &ShotHistogram, g: &BlockadeGraph) -> Result<HistogramReport> {
    if h.n_atoms != g.n() {
        return Err(Error::LengthMismatch { expected: g.n(), got: h.n_atoms });
    }
    let mis_size = count_isets(g, g.n())?.mis_size;
    let shots = h.n_shots.max(1) as f64;
    let mut classes = ClassTotals::default();
    let mut mis_bars = Vec::new();
    let mut minus_bars = Vec::new();
    for (&mask, &count) in &h.counts {
        let c = classify_mask(g, mis_size, mask);
        let bar = || Bar { bitstring: Bitstring::new(mask, g.n()).to_string(), count, probability: count as f64 / shots };
        let slot = if c.is_mis {
            mis_bars.push((mask, bar()));
            &mut classes.mis
        } else if c.is_mis_minus_1 {
            minus_bars.push((mask, bar()));
            &mut classes.mis_minus_1
        } else if c.is_independent {
            &mut classes.other_independent
        } else {
            &mut classes.non_independent
        };
        slot.count += count;
    }
    for slot in [&mut classes.mis, &mut classes.mis_minus_1, &mut classes.other_independent, &mut classes.non_independent] {
        slot.probability = slot.count as f64 / shots;
    }
    let sort = |bars: &mut Vec<(u64, Bar)>| {
        bars.sort_by(|a, b| b.1.count.cmp(&a.1.count).then(lex_key(a.0, g.n()).cmp(&lex_key(b.0, g.n()))));
        bars.drain(..).map(|b| b.1).collect::<Vec<_>>()
    };
    Ok(HistogramReport {
        n_atoms: h.n_atoms,
        n_shots: h.n_shots,
        seed: h.seed,
        spam: h.spam.map(|s| SpamReport { p_g_given_r: s.p_g_given_r, p_r_given_g: s.p_r_given_g }),
        detuning_offsets: h.detuning_offsets.iter().map(|&d| to_mhz(d)).collect(),
        mis_size,
        classes,
        mis_bars: sort(&mut mis_bars),
        mis_minus_1_bars: sort(&mut minus_bars),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::BasisSet;
    use std::sync::Arc;

    fn chain7() -> BlockadeGraph {
        BlockadeGraph::from_edges(7, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6)], 1.0).unwrap()
    }

    #[test]
    fn pure_state_without_spam() {
        let basis = Arc::new(BasisSet::full(7).unwrap());
        let mis: Bitstring = "1001001".parse().unwrap();
        let psi = QuantumState::basis_state(basis, mis.mask()).unwrap();
        let h = sample_shots(&psi, 100, None, 7).unwrap();
        assert_eq!(h.counts.len(), 1);
        assert_eq!(h.counts[&mis.mask()], 100);
    }

    #[test]
    fn readout_flip_rate() {
        let basis = Arc::new(BasisSet::full(1).unwrap());
        let psi = QuantumState::basis_state(basis, 1).unwrap();
        let n = 200_000u64;
        let h = sample_shots(&psi, n, Some(&SpamModel::experiment()), 11).unwrap();
        let frac = *h.counts.get(&0).unwrap_or(&0) as f64 / n as f64;
        let sigma = (0.1 * 0.9 / n as f64).sqrt();
        assert!((frac - 0.10).abs() < 3.0 * sigma, "{frac}");
    }

    #[test]
    fn zero_channel_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let zero = SpamModel::new(0.0, 0.0).unwrap();
        for mask in 0..128 {
            assert_eq!(zero.apply(mask, 7, &mut rng), mask);
        }
        assert!(SpamModel::new(1.2, 0.0).is_err());
    }

    #[test]
    fn same_seed_same_histogram() {
        let basis = Arc::new(BasisSet::full(3).unwrap());
        let amps = (0..8).map(|i| num_complex::Complex64::new((i as f64 + 1.0).sqrt() / 6.0, 0.0)).collect();
        let psi = QuantumState::new(basis, amps).unwrap();
        let a = sample_shots(&psi, 500, Some(&SpamModel::experiment()), 42).unwrap();
        let b = sample_shots(&psi, 500, Some(&SpamModel::experiment()), 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.counts.values().sum::<u64>(), 500);
    }

    #[test]
    fn report_classes() {
        let g = chain7();
        let mut h = ShotHistogram::empty(7, 0, None);
        for s in ["0000000", "1001001", "1010101", "1100000", "1010100", "1010100"] {
            h.push(s.parse::<Bitstring>().unwrap().mask());
        }
        let r = histogram_report(&h, &g).unwrap();
        assert_eq!(r.mis_size, 4);
        assert_eq!(r.classes.mis.count, 1);
        assert_eq!(r.classes.mis_minus_1.count, 3);
        assert_eq!(r.classes.other_independent.count, 1);
        assert_eq!(r.classes.non_independent.count, 1);
        assert_eq!(r.mis_minus_1_bars[0].bitstring, "1010100");
        assert_eq!(r.mis_minus_1_bars[0].count, 2);
        assert_eq!(r.mis_bars[0].bitstring, "1010101");
    }
}
