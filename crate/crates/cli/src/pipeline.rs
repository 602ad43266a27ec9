//! Shared stage helpers and the end-to-end pipeline.

use std::collections::BTreeMap;
use std::fmt;

use anyhow::{bail, Context};
use rydberg_mis::dynamics::EvolveOptions;
use rydberg_mis::isets::ISetStats;
use rydberg_mis::measurement::histogram_report;
use rydberg_mis::units::mhz;
use rydberg_mis::*;
use serde::Serialize;

use crate::config::{Method, RunConfig, ScheduleSpec};
use crate::manifest::{sha256_hex, Bundle, Manifest};

/// Error tagged with the pipeline stage that raised it.
#[derive(Debug)]
pub struct StageError {
    pub stage: usize,
    pub name: &'static str,
    pub source: anyhow::Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage {} ({}): {:#}", self.stage, self.name, self.source)
    }
}

impl std::error::Error for StageError {}

trait Staged<T> {
    fn stage(self, stage: usize, name: &'static str) -> Result<T, StageError>;
}

impl<T, E: Into<anyhow::Error>> Staged<T> for Result<T, E> {
    fn stage(self, stage: usize, name: &'static str) -> Result<T, StageError> {
        self.map_err(|e| StageError { stage, name, source: e.into() })
    }
}

pub fn load_graph(instance: &str, p: &PhysicalParams) -> anyhow::Result<BlockadeGraph> {
    p.validate()?;
    let arr = AtomArray::resolve(instance)?;
    Ok(mis_blockade_graph(&arr, p)?)
}

#[derive(Debug, Serialize)]
pub struct IsetsReport {
    pub instance: String,
    pub n_atoms: usize,
    #[serde(rename = "R")]
    pub r: BTreeMap<usize, u64>,
    pub mis_size: usize,
    pub mis_count: u64,
    pub hp: f64,
    /// Listed when there are at most 64 of them.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mis_sets: Option<Vec<String>>,
}

impl IsetsReport {
    pub fn new(instance: &str, stats: &ISetStats) -> Self {
        let mis_sets = match stats.mis_support() {
            Ok(sets) if sets.len() <= 64 => Some(sets.iter().map(ToString::to_string).collect()),
            _ => None,
        };
        Self {
            instance: instance.into(),
            n_atoms: stats.n,
            r: stats.r.clone(),
            mis_size: stats.mis_size,
            mis_count: stats.mis_count(),
            hp: stats.hp,
            mis_sets,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// Builds the schedule named by `spec`. ADGLB first scans the gap along the
/// standard schedule and returns that profile too.
pub fn design_schedule(
    spec: &ScheduleSpec,
    p: &PhysicalParams,
    h: &HamiltonianTerms,
    samples: usize,
) -> anyhow::Result<(PulseSchedule, Option<GapProfile>)> {
    Ok(match spec.method {
        Method::Standard => (standard_schedule(p)?, None),
        Method::Transfer => (transfer_schedule(p, mhz(spec.nu_d_over_2pi_MHz))?, None),
        Method::Adglb => {
            let profile = scan_gap(h, &standard_schedule(p)?, samples)?;
            (adglb_schedule(p, &profile, spec.j)?, Some(profile))
        }
        Method::File => {
            let path = spec.path.as_ref().context("schedule method `file` needs a path")?;
            let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            if let Some(expected) = &spec.sha256 {
                let found = sha256_hex(&bytes);
                if !found.eq_ignore_ascii_case(expected) {
                    bail!("hash check failed for {}: expected {expected}, found {found}", path.display());
                }
            }
            (PulseSchedule::from_json(std::str::from_utf8(&bytes)?)?, None)
        }
    })
}

pub fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut out = Vec::new();
    f(&mut out).expect("writing to memory");
    out
}

/// instance → isets → hamiltonian → gap/schedule → evolve → sample, all
/// artifacts hashed into `manifest.json`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<Manifest, StageError> {
    let p = cfg.params.to_physical();
    let graph = load_graph(&cfg.instance, &p).stage(0, "instance")?;
    let mut bundle = Bundle::create(&cfg.out_dir).stage(0, "instance")?;
    bundle.write("config", "config.json", (cfg.to_json() + "\n").as_bytes()).stage(0, "instance")?;

    let stats = count_isets(&graph, graph.n()).stage(1, "isets")?;
    bundle.write("isets", "isets.json", IsetsReport::new(&cfg.instance, &stats).to_json().as_bytes()).stage(1, "isets")?;

    let h = HamiltonianTerms::build(&graph, cfg.sim.basis.into(), cfg.sim.interaction.into()).stage(2, "hamiltonian")?;

    let (sched, profile) = design_schedule(&cfg.schedule, &p, &h, cfg.sim.gap_samples).stage(3, "schedule")?;
    if let Some(profile) = &profile {
        bundle.write("gap", "gap.csv", &csv_bytes(|o| profile.write_csv(o))).stage(3, "schedule")?;
    }
    bundle.write("schedule", "schedule.json", (sched.to_json().stage(3, "schedule")? + "\n").as_bytes()).stage(3, "schedule")?;

    let opts = EvolveOptions { output_points: cfg.sim.output_points, ..Default::default() };
    let res = evolve(&h, &sched, &opts).stage(4, "evolve")?;
    bundle.write("evolve", "evolution.csv", &csv_bytes(|o| res.write_csv(o))).stage(4, "evolve")?;
    let state = serde_json::to_string(&res.final_state.to_file()).stage(4, "evolve")?;
    bundle.write("evolve", "state.json", state.as_bytes()).stage(4, "evolve")?;

    let spam = cfg.sim.spam.then(SpamModel::experiment);
    let hist = sample_shots(&res.final_state, cfg.sim.shots, spam.as_ref(), cfg.sim.seed).stage(5, "sample")?;
    let report = histogram_report(&hist, &graph).stage(5, "sample")?.to_json().stage(5, "sample")?;
    bundle.write("sample", "histogram.json", (report + "\n").as_bytes()).stage(5, "sample")?;

    bundle.finish().stage(5, "sample")
}
