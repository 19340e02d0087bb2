//! Tile mesh, interfaces and kernel cost profiles.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::{CameraParams, FeatureFlags, Gaussian, GraphKind, KernelKind, OpCounts, StagedPipeline, LANES};

#[derive(Debug, Error)]
pub enum ArchError {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("op counts are missing kernel `{0}`")]
    MissingKernel(KernelKind),
    #[error("profile entry for `{kernel}` is invalid: {reason}")]
    InvalidProfile { kernel: KernelKind, reason: String },
    #[error("profile `{profile}` has no entry for `{kernel}`")]
    ProfileMissingKernel { profile: String, kernel: KernelKind },
    #[error("profile parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("profile encode error: {0}")]
    Encode(#[from] toml::ser::Error),
}

/// The 2D tile array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshConfig {
    pub rows: usize,
    pub cols: usize,
    pub clock_hz: f64,
    pub local_mem_bytes: usize,
    pub instr_mem_bytes: usize,
}

impl Default for MeshConfig {
    /// 8 x 50 tiles at 1.25 GHz with 32 KB data and 16 KB program memory each.
    fn default() -> Self {
        Self {
            rows: 8,
            cols: 50,
            clock_hz: 1.25e9,
            local_mem_bytes: 32 * 1024,
            instr_mem_bytes: 16 * 1024,
        }
    }
}

impl MeshConfig {
    pub fn validate(&self) -> Result<(), ArchError> {
        if self.rows < 1 || self.cols < 1 {
            return Err(ArchError::InvalidMesh(format!("{} x {} mesh", self.rows, self.cols)));
        }
        if !(self.clock_hz > 0.0 && self.clock_hz.is_finite()) {
            return Err(ArchError::InvalidMesh(format!("clock {} Hz", self.clock_hz)));
        }
        Ok(())
    }

    pub fn tiles(&self) -> usize {
        self.rows * self.cols
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterfaceKind {
    /// Shared local memory between neighbouring tiles.
    Window,
    /// FIFO-based point-to-point streams.
    Stream,
}

impl fmt::Display for InterfaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InterfaceKind::Window => "window",
            InterfaceKind::Stream => "stream",
        })
    }
}

impl FromStr for InterfaceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "window" => Ok(InterfaceKind::Window),
            "stream" => Ok(InterfaceKind::Stream),
            _ => Err(format!("unknown interface `{s}`")),
        }
    }
}

/// Which side of a window transfer is being charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Leg {
    Load,
    Store,
    /// The slower of load and store.
    Hop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterfaceSpec {
    pub kind: InterfaceKind,
    pub window_load_units: u32,
    pub window_store_units: u32,
    pub window_unit_bits: u32,
    /// Sustained rate; a 128-bit burst every four cycles averages the same.
    pub stream_bits_per_cycle: u32,
    pub stream_ports_in: u32,
    pub stream_ports_out: u32,
    pub fifo_depth_words: usize,
}

impl InterfaceSpec {
    pub fn new(kind: InterfaceKind) -> Self {
        Self {
            kind,
            window_load_units: 2,
            window_store_units: 1,
            window_unit_bits: 256,
            stream_bits_per_cycle: 32,
            stream_ports_in: 2,
            stream_ports_out: 2,
            fifo_depth_words: 4,
        }
    }

    pub fn window() -> Self {
        Self::new(InterfaceKind::Window)
    }

    pub fn stream() -> Self {
        Self::new(InterfaceKind::Stream)
    }

    pub fn with_fifo_depth(mut self, words: usize) -> Self {
        self.fifo_depth_words = words;
        self
    }

    pub fn window_load_bits_per_cycle(&self) -> u64 {
        u64::from(self.window_load_units * self.window_unit_bits)
    }

    pub fn window_store_bits_per_cycle(&self) -> u64 {
        u64::from(self.window_store_units * self.window_unit_bits)
    }

    /// Bits per cycle on the given leg.
    pub fn bits_per_cycle(&self, leg: Leg) -> u64 {
        match self.kind {
            InterfaceKind::Stream => u64::from(self.stream_bits_per_cycle),
            InterfaceKind::Window => match leg {
                Leg::Load => self.window_load_bits_per_cycle(),
                Leg::Store => self.window_store_bits_per_cycle(),
                Leg::Hop => self.window_load_bits_per_cycle().min(self.window_store_bits_per_cycle()),
            },
        }
    }

    /// 32-bit words a consumer can read per cycle.
    pub fn read_words_per_cycle(&self) -> u64 {
        (self.bits_per_cycle(Leg::Load) / 32).max(1)
    }
}

/// Cycles for a consumer to take in `bytes` over `iface`.
pub fn transfer_cycles(bytes: u64, iface: &InterfaceSpec) -> u64 {
    transfer_cycles_on(bytes, iface, Leg::Load)
}

pub fn transfer_cycles_on(bytes: u64, iface: &InterfaceSpec, leg: Leg) -> u64 {
    (bytes * 8).div_ceil(iface.bits_per_cycle(leg))
}

/// Array-to-logic boundary bandwidths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlioSpec {
    pub aie_to_pl_bytes_per_sec: f64,
    pub pl_to_aie_bytes_per_sec: f64,
    /// Extra cap on input bandwidth from whatever feeds the array.
    pub external_cap_bytes_per_sec: Option<f64>,
}

impl Default for PlioSpec {
    fn default() -> Self {
        Self {
            aie_to_pl_bytes_per_sec: 1.0e12,
            pl_to_aie_bytes_per_sec: 1.3e12,
            external_cap_bytes_per_sec: None,
        }
    }
}

impl PlioSpec {
    /// Input bytes/s the boundary admits when outputs are `out_bytes` per
    /// `in_bytes` of input.
    pub fn input_limit(&self, in_bytes: u64, out_bytes: u64) -> f64 {
        let mut limit = self.pl_to_aie_bytes_per_sec;
        if out_bytes > 0 {
            limit = limit.min(self.aie_to_pl_bytes_per_sec * in_bytes as f64 / out_bytes as f64);
        }
        if let Some(cap) = self.external_cap_bytes_per_sec {
            limit = limit.min(cap);
        }
        limit
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Naive,
    Stream,
    Window,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Naive, Method::Stream, Method::Window];

    pub fn graph(self) -> GraphKind {
        match self {
            Method::Naive => GraphKind::Naive,
            Method::Stream | Method::Window => GraphKind::Partitioned,
        }
    }

    /// Inter-tile interface. The unoptimized baseline uses streams.
    pub fn interface(self) -> InterfaceKind {
        match self {
            Method::Naive | Method::Stream => InterfaceKind::Stream,
            Method::Window => InterfaceKind::Window,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Naive => "naive",
            Method::Stream => "stream",
            Method::Window => "window",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown method `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleStats {
    pub avg: f64,
    pub min: u64,
    pub max: u64,
}

impl CycleStats {
    pub fn new(avg: f64, min: u64, max: u64) -> Self {
        Self { avg, min, max }
    }

    pub fn fixed(cycles: u64) -> Self {
        Self { avg: cycles as f64, min: cycles, max: cycles }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileSource {
    Calibrated,
    Analytic,
}

impl FromStr for ProfileSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "calibrated" => Ok(ProfileSource::Calibrated),
            "analytic" => Ok(ProfileSource::Analytic),
            _ => Err(format!("unknown profile source `{s}`")),
        }
    }
}

/// Cycles per Gaussian for each kernel of a task graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelCostProfile {
    pub name: String,
    pub source: ProfileSource,
    pub kernels: BTreeMap<KernelKind, CycleStats>,
}

impl KernelCostProfile {
    pub fn validate(&self) -> Result<(), ArchError> {
        for (&kernel, s) in &self.kernels {
            let fail = |reason: String| Err(ArchError::InvalidProfile { kernel, reason });
            if s.min == 0 || !(s.avg > 0.0) {
                return fail(format!("cycles must be positive ({s:?})"));
            }
            if !(s.min as f64 <= s.avg && s.avg <= s.max as f64) {
                return fail(format!("avg {} outside [{}, {}]", s.avg, s.min, s.max));
            }
        }
        Ok(())
    }

    pub fn get(&self, kernel: KernelKind) -> Result<CycleStats, ArchError> {
        self.kernels.get(&kernel).copied().ok_or_else(|| ArchError::ProfileMissingKernel {
            profile: self.name.clone(),
            kernel,
        })
    }

    /// Kernel with the largest average cost.
    pub fn bottleneck(&self) -> Option<KernelKind> {
        self.kernels
            .iter()
            .max_by(|a, b| a.1.avg.total_cmp(&b.1.avg))
            .map(|(&k, _)| k)
    }

    pub fn covers(&self, graph: GraphKind) -> Result<(), ArchError> {
        for &k in graph.kernels() {
            self.get(k)?;
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String, ArchError> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml(text: &str) -> Result<Self, ArchError> {
        let profile: Self = toml::from_str(text)?;
        profile.validate()?;
        Ok(profile)
    }
}

/// Per-kernel cycles measured on the reference hardware simulator for one
/// Gaussian: (kernel, avg, min, max).
const NAIVE_CYCLES: [(KernelKind, f64, u64, u64); 5] = [
    (KernelKind::Color, 1822.0, 1812, 1861),
    (KernelKind::Cov2D, 1342.0, 1332, 1381),
    (KernelKind::Cov2DInv, 1180.0, 1180, 1181),
    (KernelKind::Projection, 670.0, 670, 671),
    (KernelKind::Cov3D, 276.0, 276, 277),
];

const STREAM_CYCLES: [(KernelKind, f64, u64, u64); 7] = [
    (KernelKind::Color, 433.0, 428, 485),
    (KernelKind::DirVec, 262.0, 77, 428),
    (KernelKind::Cov2D, 225.0, 158, 429),
    (KernelKind::Jacobian, 135.0, 124, 214),
    (KernelKind::Cov2DInv, 230.0, 158, 483),
    (KernelKind::Projection, 79.0, 79, 429),
    (KernelKind::Cov3D, 210.0, 210, 429),
];

const WINDOW_CYCLES: [(KernelKind, f64, u64, u64); 7] = [
    (KernelKind::Color, 371.0, 371, 371),
    (KernelKind::DirVec, 83.0, 83, 83),
    (KernelKind::Cov2D, 184.0, 183, 185),
    (KernelKind::Jacobian, 130.0, 130, 132),
    (KernelKind::Cov2DInv, 57.0, 57, 57),
    (KernelKind::Projection, 89.0, 89, 89),
    (KernelKind::Cov3D, 194.0, 194, 196),
];

/// Shipped per-kernel cycle profile for a method.
pub fn calibrated_profile(method: Method) -> KernelCostProfile {
    let rows: &[(KernelKind, f64, u64, u64)] = match method {
        Method::Naive => &NAIVE_CYCLES,
        Method::Stream => &STREAM_CYCLES,
        Method::Window => &WINDOW_CYCLES,
    };
    KernelCostProfile {
        name: format!("{method}-calibrated"),
        source: ProfileSource::Calibrated,
        kernels: rows.iter().map(|&(k, avg, min, max)| (k, CycleStats::new(avg, min, max))).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticCostConfig {
    /// Lanes a vector instruction retires per cycle.
    pub lanes_per_mac: u64,
    /// Loop and load/store setup charged once per kernel invocation.
    pub overhead_cycles: u64,
}

impl Default for AnalyticCostConfig {
    fn default() -> Self {
        Self { lanes_per_mac: 8, overhead_cycles: 20 }
    }
}

impl AnalyticCostConfig {
    pub fn cycles(&self, ops: &OpCounts) -> u64 {
        let vector = (ops.vector_ops() * LANES as u64).div_ceil(self.lanes_per_mac.max(1));
        (ops.scalar_ops() + vector + self.overhead_cycles).max(1)
    }
}

/// Cost profile computed from instrumented operation counts, one entry per
/// kernel in `kernels`.
pub fn analytic_profile(
    name: &str,
    op_counts: &BTreeMap<KernelKind, OpCounts>,
    kernels: &[KernelKind],
    cfg: &AnalyticCostConfig,
) -> Result<KernelCostProfile, ArchError> {
    let mut out = BTreeMap::new();
    for &k in kernels {
        let ops = op_counts.get(&k).ok_or(ArchError::MissingKernel(k))?;
        out.insert(k, CycleStats::fixed(cfg.cycles(ops)));
    }
    Ok(KernelCostProfile { name: name.to_string(), source: ProfileSource::Analytic, kernels: out })
}

/// Per-kernel op counts of a method's kernels on a representative Gaussian:
/// the first one in `sample` that produces an unflagged feature.
pub fn measure_op_counts(
    method: Method,
    sample: &[Gaussian],
    cam: &CameraParams,
) -> BTreeMap<KernelKind, OpCounts> {
    let pipeline = StagedPipeline::new(method.graph());
    let mut fallback = None;
    for g in sample {
        let (out, counts) = pipeline.run_counted(g, cam);
        if out.flags == FeatureFlags::empty() {
            return counts.into_iter().collect();
        }
        fallback.get_or_insert(counts);
    }
    fallback.unwrap_or_default().into_iter().collect()
}

/// Analytic profile for a method measured on `sample`.
pub fn analytic_profile_for(
    method: Method,
    sample: &[Gaussian],
    cam: &CameraParams,
    cfg: &AnalyticCostConfig,
) -> Result<KernelCostProfile, ArchError> {
    let counts = measure_op_counts(method, sample, cam);
    analytic_profile(&format!("{method}-analytic"), &counts, method.graph().kernels(), cfg)
}

/// Throughput loss once more units are active than the interconnect sustains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContentionModel {
    pub saturation_units: usize,
    /// Added stall per unit beyond saturation, as a fraction of service time.
    pub excess_stall_fraction: f64,
}

/// Fit with `sim::calibrate_contention` against a 226x window-50 speedup.
pub const DEFAULT_EXCESS_STALL_FRACTION: f64 = 0.004389380530973446;

impl Default for ContentionModel {
    fn default() -> Self {
        Self { saturation_units: 25, excess_stall_fraction: DEFAULT_EXCESS_STALL_FRACTION }
    }
}

impl ContentionModel {
    pub fn none() -> Self {
        Self { saturation_units: usize::MAX, excess_stall_fraction: 0.0 }
    }

    /// Relative stall time at `units`: zero up to saturation, linear beyond.
    pub fn stall_penalty(&self, units: usize) -> f64 {
        if units <= self.saturation_units {
            0.0
        } else {
            self.excess_stall_fraction * (units - self.saturation_units) as f64
        }
    }

    /// Multiplicative throughput factor, `1 / (1 + stall_penalty)`.
    pub fn factor(&self, units: usize) -> f64 {
        1.0 / (1.0 + self.stall_penalty(units))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_mesh() {
        let m = MeshConfig::default();
        assert_eq!((m.rows, m.cols, m.tiles()), (8, 50, 400));
        assert_eq!(m.clock_hz, 1.25e9);
        assert_eq!(m.local_mem_bytes, 32768);
        m.validate().unwrap();
        assert!(MeshConfig { rows: 0, ..m }.validate().is_err());
        assert!(MeshConfig { clock_hz: 0.0, ..m }.validate().is_err());
    }

    #[test]
    fn interface_defaults() {
        let w = InterfaceSpec::window();
        assert_eq!(w.window_load_bits_per_cycle(), 512);
        assert_eq!(w.window_store_bits_per_cycle(), 256);
        assert_eq!(w.read_words_per_cycle(), 16);
        let s = InterfaceSpec::stream();
        assert_eq!(s.bits_per_cycle(Leg::Load), 32);
        assert_eq!(s.read_words_per_cycle(), 1);
        assert_eq!(s.fifo_depth_words, 4);
    }

    #[test]
    fn transfer_examples() {
        let (w, s) = (InterfaceSpec::window(), InterfaceSpec::stream());
        assert_eq!(transfer_cycles(0, &s), 0);
        assert_eq!(transfer_cycles(0, &w), 0);
        assert_eq!(transfer_cycles(236, &s), 59);
        assert_eq!(transfer_cycles(236, &w), 4);
        assert_eq!(transfer_cycles_on(236, &w, Leg::Store), 8);
        assert_eq!(transfer_cycles_on(236, &w, Leg::Hop), 8);
        assert_eq!(transfer_cycles_on(236, &s, Leg::Hop), 59);
    }

    #[test]
    fn plio_defaults() {
        let p = PlioSpec::default();
        assert_eq!(p.aie_to_pl_bytes_per_sec, 1.0e12);
        assert_eq!(p.pl_to_aie_bytes_per_sec, 1.3e12);
        assert_eq!(p.input_limit(236, 0), 1.3e12);
        let capped = PlioSpec { external_cap_bytes_per_sec: Some(45.8e6), ..p };
        assert_eq!(capped.input_limit(236, 52), 45.8e6);
    }

    #[test]
    fn table_rows() {
        let w = calibrated_profile(Method::Window);
        assert_eq!(w.get(KernelKind::Color).unwrap(), CycleStats::new(371.0, 371, 371));
        let n = calibrated_profile(Method::Naive);
        assert_eq!(n.get(KernelKind::Cov3D).unwrap(), CycleStats::new(276.0, 276, 277));
        assert!(n.get(KernelKind::DirVec).is_err());
        let s = calibrated_profile(Method::Stream);
        assert_eq!(s.get(KernelKind::DirVec).unwrap(), CycleStats::new(262.0, 77, 428));
        for m in Method::ALL {
            let p = calibrated_profile(m);
            p.validate().unwrap();
            p.covers(m.graph()).unwrap();
            assert_eq!(p.bottleneck(), Some(KernelKind::Color), "{m}");
        }
    }

    #[test]
    fn profile_toml_round_trip() {
        for m in Method::ALL {
            let p = calibrated_profile(m);
            let text = p.to_toml().unwrap();
            assert!(text.contains("cov2D_inv"));
            assert_eq!(KernelCostProfile::from_toml(&text).unwrap(), p);
        }
    }

    #[test]
    fn profile_rejects_bad_stats() {
        let mut p = calibrated_profile(Method::Window);
        p.kernels.insert(KernelKind::Color, CycleStats::new(10.0, 20, 30));
        assert!(matches!(p.validate(), Err(ArchError::InvalidProfile { .. })));
        p.kernels.insert(KernelKind::Color, CycleStats::new(0.0, 0, 0));
        assert!(p.validate().is_err());
    }

    #[test]
    fn analytic_overhead_only() {
        let counts = BTreeMap::from([(KernelKind::Cov3D, OpCounts::default())]);
        let p = analytic_profile("t", &counts, &[KernelKind::Cov3D], &AnalyticCostConfig::default()).unwrap();
        assert_eq!(p.get(KernelKind::Cov3D).unwrap(), CycleStats::fixed(20));
        let err = analytic_profile("t", &counts, &[KernelKind::Color], &AnalyticCostConfig::default());
        assert!(matches!(err, Err(ArchError::MissingKernel(KernelKind::Color))));
    }

    #[test]
    fn contention_shape() {
        let c = ContentionModel { saturation_units: 25, excess_stall_fraction: 0.01 };
        assert_eq!(c.factor(1), 1.0);
        assert_eq!(c.factor(25), 1.0);
        assert!(c.factor(26) < 1.0);
        let mut last = 0.0;
        for n in 1..=100 {
            let p = c.stall_penalty(n);
            assert!(p >= last);
            last = p;
        }
    }
}
