//! Argument parsing and dispatch. Exit codes: 0 success, 1 error, 2 a
//! reproduced figure missed one of its targets.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use rydberg_mis::dynamics::{EvolveOptions, QuantumState};
use rydberg_mis::measurement::histogram_report;
use rydberg_mis::spectrum::{scan_gap_with, ScanOptions};
use rydberg_mis::*;

use crate::config::{Basis, Interaction, Method, RunConfig, ScheduleSpec};
use crate::manifest;
use crate::pipeline::{self, csv_bytes, design_schedule, load_graph, IsetsReport};
use crate::reproduce::{self, Figure};

#[derive(Debug, Parser)]
#[command(name = "rydberg-mis", version, about = "Gap-guided detuning schedules for Rydberg-atom MIS preparation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Independent-set counts R_k, |MIS| and the hardness parameter.
    Isets {
        #[arg(long)]
        instance: String,
        /// Smallest set size to count (defaults to |MIS| − 1).
        #[arg(long)]
        min_size: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Two lowest eigenvalues along a schedule.
    Gap {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        schedule: ScheduleArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesize a schedule and write it as JSON.
    Design {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "adglb")]
        method: Method,
        #[arg(long, default_value_t = rydberg_mis::schedule::DEFAULT_J)]
        j: f64,
        /// Heuristic waypoint offset ν_d/2π, MHz (transfer only).
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        nu_d: f64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the gap profile the schedule was built from.
        #[arg(long)]
        gap_out: Option<PathBuf>,
    },
    /// Integrate the Schrödinger equation from all-|g⟩.
    Evolve {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        schedule: ScheduleArgs,
        #[arg(long, default_value_t = 200)]
        output_points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Final state as JSON, for `sample`.
        #[arg(long)]
        state_out: Option<PathBuf>,
    },
    /// Effective two-level leakage model along a schedule.
    Twolevel {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        schedule: ScheduleArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw readout shots from a saved state.
    Sample {
        #[arg(long)]
        instance: String,
        #[arg(long)]
        state: PathBuf,
        #[arg(long, default_value_t = 300)]
        shots: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Disable the readout-error channel.
        #[arg(long)]
        no_spam: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full run from a config file; flags override config fields.
    Pipeline(PipelineArgs),
    /// Regenerate a figure's data and check it against the published values.
    Reproduce {
        #[arg(value_enum)]
        figure: Figure,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Convert a schedule to an analog-Hamiltonian-simulation program (SI units).
    ExportAhs {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        schedule: ScheduleArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, default_value = "Q1D_10")]
    pub instance: String,
    #[arg(long, value_enum, default_value = "full")]
    pub basis: Basis,
    #[arg(long, value_enum, default_value = "vdw")]
    pub interaction: Interaction,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    /// `std`, `adglb`, `transfer` or a schedule JSON file.
    #[arg(long, default_value = "std")]
    pub schedule: String,
    #[arg(long, default_value_t = rydberg_mis::schedule::DEFAULT_J)]
    pub j: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub nu_d: f64,
    /// Gap samples for scans and ADGLB design.
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
}

impl ScheduleArgs {
    fn spec(&self) -> ScheduleSpec {
        let (method, path) = match self.schedule.as_str() {
            "std" | "standard" => (Method::Standard, None),
            "adglb" => (Method::Adglb, None),
            "transfer" => (Method::Transfer, None),
            file => (Method::File, Some(PathBuf::from(file))),
        };
        ScheduleSpec { method, j: self.j, nu_d_over_2pi_MHz: self.nu_d, path, sha256: None }
    }
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Only re-hash the files listed in a manifest (or bundle directory).
    #[arg(long, conflicts_with = "config")]
    pub verify: Option<PathBuf>,
    #[arg(long)]
    pub instance: Option<String>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long)]
    pub j: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub nu_d: Option<f64>,
    #[arg(long)]
    pub schedule_file: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub basis: Option<Basis>,
    #[arg(long, value_enum)]
    pub interaction: Option<Interaction>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub output_points: Option<usize>,
    #[arg(long)]
    pub shots: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub no_spam: bool,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

impl PipelineArgs {
    /// Config file (or defaults) with every given flag applied on top.
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path).with_context(|| format!("loading config {}", path.display()))?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.instance {
            cfg.instance = v.clone();
        }
        if let Some(v) = self.method {
            cfg.schedule.method = v;
        }
        if let Some(v) = self.j {
            cfg.schedule.j = v;
        }
        if let Some(v) = self.nu_d {
            cfg.schedule.nu_d_over_2pi_MHz = v;
        }
        if let Some(v) = &self.schedule_file {
            cfg.schedule.method = Method::File;
            cfg.schedule.path = Some(v.clone());
        }
        if let Some(v) = self.basis {
            cfg.sim.basis = v;
        }
        if let Some(v) = self.interaction {
            cfg.sim.interaction = v;
        }
        if let Some(v) = self.samples {
            cfg.sim.gap_samples = v;
        }
        if let Some(v) = self.output_points {
            cfg.sim.output_points = v;
        }
        if let Some(v) = self.shots {
            cfg.sim.shots = v;
        }
        if let Some(v) = self.seed {
            cfg.sim.seed = v;
        }
        if self.no_spam {
            cfg.sim.spam = false;
        }
        if let Some(v) = &self.out_dir {
            cfg.out_dir = v.clone();
        }
        Ok(cfg)
    }
}

/// Writes to `path`, or stdout when absent.
fn emit(path: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => Ok(std::io::stdout().write_all(bytes)?),
    }
}

struct Model {
    params: PhysicalParams,
    graph: BlockadeGraph,
    terms: HamiltonianTerms,
}

fn model(m: &ModelArgs) -> anyhow::Result<Model> {
    let params = PhysicalParams::experiment();
    let graph = load_graph(&m.instance, &params)?;
    let terms = HamiltonianTerms::build(&graph, m.basis.into(), m.interaction.into())?;
    Ok(Model { params, graph, terms })
}

/// Parses `args` and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn dispatch(cmd: Command) -> anyhow::Result<i32> {
    match cmd {
        Command::Isets { instance, min_size, out } => {
            let p = PhysicalParams::experiment();
            let graph = load_graph(&instance, &p)?;
            let stats = match min_size {
                Some(k) => count_isets(&graph, k)?,
                None => count_isets(&graph, graph.n())?,
            };
            emit(out.as_deref(), IsetsReport::new(&instance, &stats).to_json().as_bytes())?;
        }
        Command::Gap { model: m, schedule, out } => {
            let md = model(&m)?;
            let (sched, _) = design_schedule(&schedule.spec(), &md.params, &md.terms, schedule.samples)?;
            let profile = scan_gap_with(&md.terms, &sched, &ScanOptions { n_samples: schedule.samples, ..Default::default() })?;
            emit(out.as_deref(), &csv_bytes(|o| profile.write_csv(o)))?;
            eprintln!(
                "t_min = {:.4} us, delta_min/2pi = {:.4} MHz, g_min/2pi = {:.4} MHz",
                profile.t_min,
                units::to_mhz(profile.delta_min),
                units::to_mhz(profile.g_min)
            );
        }
        Command::Design { model: m, method, j, nu_d, samples, out, gap_out } => {
            let md = model(&m)?;
            let spec = ScheduleSpec { method, j, nu_d_over_2pi_MHz: nu_d, path: None, sha256: None };
            if method == Method::File {
                anyhow::bail!("`design` synthesizes schedules; use standard, adglb or transfer");
            }
            let (sched, profile) = design_schedule(&spec, &md.params, &md.terms, samples)?;
            if let (Some(path), Some(profile)) = (gap_out.as_deref(), profile.as_ref()) {
                emit(Some(path), &csv_bytes(|o| profile.write_csv(o)))?;
            }
            emit(out.as_deref(), (sched.to_json()? + "\n").as_bytes())?;
        }
        Command::Evolve { model: m, schedule, output_points, out, state_out } => {
            let md = model(&m)?;
            let (sched, _) = design_schedule(&schedule.spec(), &md.params, &md.terms, schedule.samples)?;
            let res = evolve(&md.terms, &sched, &EvolveOptions { output_points, ..Default::default() })?;
            emit(out.as_deref(), &csv_bytes(|o| res.write_csv(o)))?;
            if let Some(path) = state_out {
                res.final_state.save(path)?;
            }
            eprintln!("final p_e0 = {:.6}, P_MIS = {:.6}", res.final_p_e0, mis_probability(&res, &md.graph)?);
        }
        Command::Twolevel { model: m, schedule, out } => {
            let md = model(&m)?;
            let spec = schedule.spec();
            let (sched, _) = design_schedule(&spec, &md.params, &md.terms, schedule.samples)?;
            let opts = ScanOptions { n_samples: schedule.samples, store_vectors: true, ..Default::default() };
            let profile = scan_gap_with(&md.terms, &sched, &opts)?;
            let tl = build_two_level_model(&md.terms, &sched, &profile)?;
            let p_e1 = evolve_two_level(&tl)?;
            emit(out.as_deref(), &csv_bytes(|o| tl.write_csv(&p_e1, o)))?;
            eprintln!("final two-level leakage = {:.6}", p_e1.last().copied().unwrap_or(0.0));
        }
        Command::Sample { instance, state, shots, seed, no_spam, out } => {
            let graph = load_graph(&instance, &PhysicalParams::experiment())?;
            let psi = QuantumState::load(&state).with_context(|| format!("loading state {}", state.display()))?;
            let spam = (!no_spam).then(SpamModel::experiment);
            let hist = sample_shots(&psi, shots, spam.as_ref(), seed)?;
            emit(out.as_deref(), (histogram_report(&hist, &graph)?.to_json()? + "\n").as_bytes())?;
        }
        Command::Pipeline(args) => {
            if let Some(path) = &args.verify {
                let m = manifest::verify(path)?;
                eprintln!("{} files verified", m.entries.len());
                return Ok(0);
            }
            let cfg = args.resolve()?;
            let m = pipeline::run_pipeline(&cfg)?;
            eprintln!("wrote {} files to {}", m.entries.len() + 1, cfg.out_dir.display());
        }
        Command::Reproduce { figure, out_dir, jobs } => {
            let dir = out_dir.unwrap_or_else(|| PathBuf::from("reproduce").join(figure.name()));
            let outcome = reproduce::run(figure, &dir, jobs)?;
            for c in &outcome.summary.checks {
                println!("{} {}: {} (target {})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.target);
            }
            return Ok(if outcome.summary.pass { 0 } else { 2 });
        }
        Command::ExportAhs { model: m, schedule, out } => {
            let md = model(&m)?;
            let (sched, _) = design_schedule(&schedule.spec(), &md.params, &md.terms, schedule.samples)?;
            emit(out.as_deref(), (serde_json::to_string_pretty(&sched.to_ahs_program())? + "\n").as_bytes())?;
        }
    }
    Ok(0)
}
