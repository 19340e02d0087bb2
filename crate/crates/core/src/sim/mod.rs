//! Throughput models for placed task graphs.
//!
//! [`simulate_analytic`] treats each unit as a pipeline whose steady-state
//! rate is set by its slowest stage. [`simulate_event`] steps a cycle clock
//! through every unit's kernel chain with bounded FIFOs between tiles.

mod event;
mod export;
mod sweep;

pub use event::simulate_event;
pub use export::{report_csv, report_json, CsvRow, REPORT_CSV_HEADER};
pub use sweep::{calibrate_contention, default_grid, sweep, RunSettings, SweepRow, Workload};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::{
    calibrated_profile, transfer_cycles, ArchError, ContentionModel, CycleStats, InterfaceKind, InterfaceSpec,
    KernelCostProfile, MeshConfig, Method, PlioSpec,
};
use crate::kernels::{Gaussian, KernelKind};
use crate::mapper::{MapError, Placement};

/// Input bytes per Gaussian used as the throughput basis.
pub const RECORD_BYTES: u64 = Gaussian::RECORD_BYTES as u64;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Arch(#[from] ArchError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("placement has {placed} units but the config asks for {configured}")]
    UnitMismatch { placed: usize, configured: usize },
    #[error("workload must contain at least one Gaussian")]
    EmptyWorkload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    Analytic,
    Event,
}

impl fmt::Display for SimMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SimMode::Analytic => "analytic",
            SimMode::Event => "event",
        })
    }
}

impl FromStr for SimMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "analytic" => Ok(SimMode::Analytic),
            "event" => Ok(SimMode::Event),
            _ => Err(format!("unknown mode `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub mesh: MeshConfig,
    pub iface: InterfaceSpec,
    pub plio: PlioSpec,
    pub profile: KernelCostProfile,
    pub contention: ContentionModel,
    pub n_gaussians: usize,
    pub n_units: usize,
    pub mode: SimMode,
    pub seed: u64,
    /// Charge interface cycles for moving each stage's input.
    pub charge_transfer: bool,
    /// Draw per-invocation kernel cost uniformly from the profile range.
    pub jitter: bool,
}

impl SimConfig {
    /// One unit of `method` with its calibrated profile and 100 Gaussians.
    pub fn for_method(method: Method) -> Self {
        Self {
            mesh: MeshConfig::default(),
            iface: InterfaceSpec::new(method.interface()),
            plio: PlioSpec::default(),
            profile: calibrated_profile(method),
            contention: ContentionModel::default(),
            n_gaussians: 100,
            n_units: 1,
            mode: SimMode::Analytic,
            seed: 0,
            charge_transfer: true,
            jitter: false,
        }
    }

    pub fn with_units(mut self, n_units: usize) -> Self {
        self.n_units = n_units;
        self
    }

    pub fn with_mode(mut self, mode: SimMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_gaussians(mut self, n: usize) -> Self {
        self.n_gaussians = n;
        self
    }

    pub fn validate(&self, placement: &Placement) -> Result<(), SimError> {
        self.mesh.validate()?;
        self.profile.validate()?;
        self.profile.covers(placement.graph.kind)?;
        if self.n_gaussians == 0 {
            return Err(SimError::EmptyWorkload);
        }
        if placement.n_units() != self.n_units {
            return Err(SimError::UnitMismatch { placed: placement.n_units(), configured: self.n_units });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    pub kernel: KernelKind,
    /// Cycles per Gaussian, including input transfer and stalls.
    pub avg_cycles: f64,
    pub min_cycles: u64,
    pub max_cycles: u64,
    /// Compute-only cycles per Gaussian.
    pub compute_avg_cycles: f64,
    pub compute_min_cycles: u64,
    pub compute_max_cycles: u64,
    /// Compute cycles summed over all Gaussians and units.
    pub busy_cycles: u64,
    pub stall_cycles: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub mode: SimMode,
    pub interface: InterfaceKind,
    pub profile: String,
    pub n_units: usize,
    pub n_gaussians: usize,
    pub clock_hz: f64,
    pub total_cycles: f64,
    /// Input bytes (236 per Gaussian) per second.
    pub throughput_bytes_per_sec: f64,
    pub output_bytes_per_sec: f64,
    pub effective_parallel_efficiency: f64,
    pub bottleneck_kernel: KernelKind,
    pub kernels: Vec<KernelReport>,
}

impl SimReport {
    pub fn throughput_mb_per_sec(&self) -> f64 {
        self.throughput_bytes_per_sec / 1e6
    }

    /// Throughput recomputed from the cycle count.
    pub fn recomputed_throughput(&self) -> f64 {
        self.n_gaussians as f64 * RECORD_BYTES as f64 * self.clock_hz / self.total_cycles
    }

    pub fn kernel(&self, kernel: KernelKind) -> Option<&KernelReport> {
        self.kernels.iter().find(|k| k.kernel == kernel)
    }
}

/// One kernel of a unit's chain with its cost inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Stage {
    pub kernel: KernelKind,
    pub cost: CycleStats,
    pub in_bytes: u64,
    pub out_bytes: u64,
    pub transfer: u64,
}

impl Stage {
    pub fn service(&self) -> f64 {
        self.cost.avg + self.transfer as f64
    }
}

pub(crate) fn stages(cfg: &SimConfig, placement: &Placement) -> Result<Vec<Stage>, SimError> {
    let hops = placement.graph.hops();
    placement
        .graph
        .nodes
        .iter()
        .enumerate()
        .map(|(i, &kernel)| {
            let in_bytes = hops[i].bytes;
            let transfer = if cfg.charge_transfer { transfer_cycles(in_bytes, &cfg.iface) } else { 0 };
            Ok(Stage { kernel, cost: cfg.profile.get(kernel)?, in_bytes, out_bytes: hops[i + 1].bytes, transfer })
        })
        .collect()
}

fn bottleneck(stages: &[Stage]) -> &Stage {
    stages
        .iter()
        .max_by(|a, b| a.service().total_cmp(&b.service()))
        .expect("task graphs are never empty")
}

/// Gaussians handled by `unit` when `total` are dealt round-robin.
pub(crate) fn unit_share(total: usize, units: usize, unit: usize) -> usize {
    total / units + usize::from(unit < total % units)
}

pub fn simulate(cfg: &SimConfig, placement: &Placement) -> Result<SimReport, SimError> {
    match cfg.mode {
        SimMode::Analytic => simulate_analytic(cfg, placement),
        SimMode::Event => simulate_event(cfg, placement),
    }
}

/// Steady-state throughput from per-stage service times.
pub fn simulate_analytic(cfg: &SimConfig, placement: &Placement) -> Result<SimReport, SimError> {
    cfg.validate(placement)?;
    let stages = stages(cfg, placement)?;
    let slowest = bottleneck(&stages);
    let clock = cfg.mesh.clock_hz;
    let single = RECORD_BYTES as f64 * clock / slowest.service();
    let ideal = cfg.n_units as f64 * single;
    let penalty = cfg.contention.stall_penalty(cfg.n_units);
    let limit = cfg.plio.input_limit(RECORD_BYTES, placement.graph.sink_bytes());
    let throughput = (ideal * cfg.contention.factor(cfg.n_units)).min(limit);
    let total_cycles = cfg.n_gaussians as f64 * RECORD_BYTES as f64 * clock / throughput;

    let n = cfg.n_gaussians as f64;
    let kernels = stages
        .iter()
        .map(|s| KernelReport {
            kernel: s.kernel,
            avg_cycles: s.service(),
            min_cycles: s.cost.min + s.transfer,
            max_cycles: s.cost.max + s.transfer,
            compute_avg_cycles: s.cost.avg,
            compute_min_cycles: s.cost.min,
            compute_max_cycles: s.cost.max,
            busy_cycles: (n * s.cost.avg).round() as u64,
            stall_cycles: (n * s.service() * penalty).round() as u64,
        })
        .collect();

    Ok(SimReport {
        mode: SimMode::Analytic,
        interface: cfg.iface.kind,
        profile: cfg.profile.name.clone(),
        n_units: cfg.n_units,
        n_gaussians: cfg.n_gaussians,
        clock_hz: clock,
        total_cycles,
        throughput_bytes_per_sec: throughput,
        output_bytes_per_sec: throughput * placement.graph.sink_bytes() as f64 / RECORD_BYTES as f64,
        effective_parallel_efficiency: throughput / ideal,
        bottleneck_kernel: slowest.kernel,
        kernels,
    })
}
