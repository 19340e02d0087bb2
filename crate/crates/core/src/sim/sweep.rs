use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{simulate, SimConfig, SimError, SimMode, SimReport};
use crate::arch::{
    calibrated_profile, ContentionModel, InterfaceKind, InterfaceSpec, KernelCostProfile, MeshConfig, Method,
    PlioSpec,
};
use crate::kernels::GraphKind;
use crate::mapper::{build_task_graph, place};

/// How many Gaussians a run processes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Workload {
    Total(usize),
    PerUnit(usize),
}

impl Workload {
    pub fn gaussians(self, units: usize) -> usize {
        match self {
            Workload::Total(n) => n,
            Workload::PerUnit(n) => n * units,
        }
    }
}

impl Default for Workload {
    fn default() -> Self {
        Workload::PerUnit(100)
    }
}

/// Everything a run needs besides the method and the unit count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub mode: SimMode,
    pub profiles: BTreeMap<Method, KernelCostProfile>,
    /// Replaces the method's own interface when set.
    pub interface: Option<InterfaceKind>,
    pub workload: Workload,
    pub seed: u64,
    pub fifo_depth_words: Option<usize>,
    pub mesh: MeshConfig,
    pub plio: PlioSpec,
    pub contention: ContentionModel,
    pub charge_transfer: bool,
    pub jitter: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self::calibrated()
    }
}

impl RunSettings {
    /// Calibrated profiles, analytic mode, 100 Gaussians per unit.
    pub fn calibrated() -> Self {
        Self {
            mode: SimMode::Analytic,
            profiles: Method::ALL.into_iter().map(|m| (m, calibrated_profile(m))).collect(),
            interface: None,
            workload: Workload::default(),
            seed: 0,
            fifo_depth_words: None,
            mesh: MeshConfig::default(),
            plio: PlioSpec::default(),
            contention: ContentionModel::default(),
            charge_transfer: true,
            jitter: false,
        }
    }

    pub fn with_mode(mut self, mode: SimMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn config(&self, method: Method, units: usize) -> SimConfig {
        let mut iface = InterfaceSpec::new(self.interface.unwrap_or(method.interface()));
        if let Some(depth) = self.fifo_depth_words {
            iface = iface.with_fifo_depth(depth);
        }
        SimConfig {
            mesh: self.mesh,
            iface,
            plio: self.plio,
            profile: self.profiles.get(&method).cloned().unwrap_or_else(|| calibrated_profile(method)),
            contention: self.contention,
            n_gaussians: self.workload.gaussians(units),
            n_units: units,
            mode: self.mode,
            seed: self.seed,
            charge_transfer: self.charge_transfer,
            jitter: self.jitter,
        }
    }

    pub fn run(&self, method: Method, units: usize) -> Result<SimReport, SimError> {
        let cfg = self.config(method, units);
        let graph = build_task_graph(method.graph() == GraphKind::Partitioned);
        let placement = place(&graph, units, &cfg.mesh)?;
        simulate(&cfg, &placement)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: Method,
    pub n_units: usize,
    pub report: SimReport,
    /// Throughput relative to one naive unit under the same settings.
    pub speedup_vs_naive1: f64,
}

/// Runs every `(method, units)` cell in parallel; rows keep the input order.
pub fn sweep(settings: &RunSettings, cells: &[(Method, usize)]) -> Result<Vec<SweepRow>, SimError> {
    let baseline = settings.run(Method::Naive, 1)?.throughput_bytes_per_sec;
    cells
        .par_iter()
        .map(|&(method, n_units)| {
            let report = settings.run(method, n_units)?;
            let speedup_vs_naive1 = report.throughput_bytes_per_sec / baseline;
            Ok(SweepRow { method, n_units, report, speedup_vs_naive1 })
        })
        .collect()
}

/// Default sweep grid: one naive unit, then stream and window at 1, 4, 8,
/// 25 and 50 units.
pub fn default_grid() -> Vec<(Method, usize)> {
    let mut cells = vec![(Method::Naive, 1)];
    for method in [Method::Stream, Method::Window] {
        cells.extend([1, 4, 8, 25, 50].map(|n| (method, n)));
    }
    cells
}

/// Excess stall fraction that makes `units` window units reach
/// `target_speedup` over one naive unit in analytic mode with the
/// calibrated profiles.
pub fn calibrate_contention(target_speedup: f64, units: usize) -> Result<f64, SimError> {
    let settings = RunSettings { contention: ContentionModel::none(), ..RunSettings::calibrated() };
    let naive = settings.run(Method::Naive, 1)?.throughput_bytes_per_sec;
    let window = settings.run(Method::Window, units)?.throughput_bytes_per_sec;
    let linear = window / naive;
    let excess = units.saturating_sub(ContentionModel::default().saturation_units).max(1) as f64;
    Ok((linear / target_speedup - 1.0) / excess)
}
