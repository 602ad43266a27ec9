//! Run configuration. Frequencies are given as value/2π in MHz, times in μs.

use std::path::PathBuf;

use rydberg_mis::units::{mhz, to_mhz};
use rydberg_mis::{BasisKind, InteractionModel, PhysicalParams};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Built-in instance name or path to an instance JSON file.
    pub instance: String,
    pub params: ParamsConfig,
    pub schedule: ScheduleSpec,
    pub sim: SimConfig,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            instance: "Q1D_10".into(),
            params: ParamsConfig::default(),
            schedule: ScheduleSpec::default(),
            sim: SimConfig::default(),
            out_dir: PathBuf::from("run"),
        }
    }
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsConfig {
    pub c6_over_2pi_MHz_um6: f64,
    pub omega0_over_2pi_MHz: f64,
    pub delta_i_over_2pi_MHz: f64,
    pub delta_f_over_2pi_MHz: f64,
    pub T_us: f64,
    pub t_r_us: f64,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self::from_physical(&PhysicalParams::experiment())
    }
}

impl ParamsConfig {
    pub fn from_physical(p: &PhysicalParams) -> Self {
        Self {
            c6_over_2pi_MHz_um6: to_mhz(p.c6),
            omega0_over_2pi_MHz: to_mhz(p.omega0),
            delta_i_over_2pi_MHz: to_mhz(p.delta_i),
            delta_f_over_2pi_MHz: to_mhz(p.delta_f),
            T_us: p.total_time,
            t_r_us: p.ramp_time,
        }
    }

    pub fn to_physical(&self) -> PhysicalParams {
        PhysicalParams {
            c6: mhz(self.c6_over_2pi_MHz_um6),
            omega0: mhz(self.omega0_over_2pi_MHz),
            delta_i: mhz(self.delta_i_over_2pi_MHz),
            delta_f: mhz(self.delta_f_over_2pi_MHz),
            total_time: self.T_us,
            ramp_time: self.t_r_us,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Standard,
    Adglb,
    Transfer,
    File,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSpec {
    pub method: Method,
    pub j: f64,
    pub nu_d_over_2pi_MHz: f64,
    /// Schedule JSON for `method = "file"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Expected SHA-256 of `path`, checked before use.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self { method: Method::Adglb, j: rydberg_mis::schedule::DEFAULT_J, nu_d_over_2pi_MHz: 0.0, path: None, sha256: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Interaction {
    /// All-pairs C6/r⁶.
    Vdw,
    /// Constant U on blockade edges only.
    Edges,
}

impl From<Interaction> for InteractionModel {
    fn from(i: Interaction) -> Self {
        match i {
            Interaction::Vdw => InteractionModel::VanDerWaals,
            Interaction::Edges => InteractionModel::BlockadeEdges,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Full,
    Blockade,
}

impl From<Basis> for BasisKind {
    fn from(b: Basis) -> Self {
        match b {
            Basis::Full => BasisKind::Full,
            Basis::Blockade => BasisKind::Blockade,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub basis: Basis,
    pub interaction: Interaction,
    pub gap_samples: usize,
    pub output_points: usize,
    pub shots: u64,
    pub seed: u64,
    pub spam: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            basis: Basis::Full,
            interaction: Interaction::Vdw,
            gap_samples: 200,
            output_points: 200,
            shots: 300,
            seed: 0,
            spam: true,
        }
    }
}
