use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::generate::generate_gaussians;
use crate::arch::{
    analytic_profile_for, calibrated_profile, AnalyticCostConfig, ArchError, KernelCostProfile, Method,
    ProfileSource,
};
use crate::kernels::{CameraParams, KernelKind};
use crate::sim::{RunSettings, SimError, SimMode, SimReport, Workload};

/// Gaussians sampled to measure op counts for analytic profiles.
pub const ANALYTIC_SAMPLE: usize = 100;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("preset `{preset}`: {source}")]
    Sim {
        preset: String,
        #[source]
        source: SimError,
    },
    #[error(transparent)]
    Arch(#[from] ArchError),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPreset {
    pub name: String,
    pub method: Method,
    pub unit_counts: Vec<usize>,
    pub profile: ProfileSource,
    pub workload: Workload,
    pub seed: u64,
}

impl ExperimentPreset {
    pub fn new(method: Method, units: usize) -> Self {
        Self {
            name: format!("{method}-{units}"),
            method,
            unit_counts: vec![units],
            profile: ProfileSource::Calibrated,
            workload: Workload::default(),
            seed: 0,
        }
    }
}

pub const SWEEP_PRESET: &str = "sweep";

/// naive-1, stream-1 and window at 1, 4, 8, 25 and 50 units.
pub fn shipped_presets() -> Vec<ExperimentPreset> {
    let mut presets = vec![ExperimentPreset::new(Method::Naive, 1), ExperimentPreset::new(Method::Stream, 1)];
    presets.extend([1, 4, 8, 25, 50].map(|n| ExperimentPreset::new(Method::Window, n)));
    presets
}

/// A shipped preset by name; `sweep` expands to all of them.
pub fn find_presets(name: &str) -> Result<Vec<ExperimentPreset>, ExperimentError> {
    let all = shipped_presets();
    if name == SWEEP_PRESET {
        return Ok(all);
    }
    all.into_iter()
        .find(|p| p.name == name)
        .map(|p| vec![p])
        .ok_or_else(|| ExperimentError::UnknownPreset(name.to_string()))
}

/// One cost profile per method from the requested source.
pub fn resolve_profiles(source: ProfileSource, seed: u64) -> Result<BTreeMap<Method, KernelCostProfile>, ArchError> {
    match source {
        ProfileSource::Calibrated => Ok(Method::ALL.into_iter().map(|m| (m, calibrated_profile(m))).collect()),
        ProfileSource::Analytic => {
            let sample = generate_gaussians(ANALYTIC_SAMPLE, seed);
            let cam = CameraParams::default_view();
            let cfg = AnalyticCostConfig::default();
            Method::ALL
                .into_iter()
                .map(|m| Ok((m, analytic_profile_for(m, &sample, &cam, &cfg)?)))
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub preset: String,
    pub method: Method,
    pub n_units: usize,
    pub mode: SimMode,
    pub throughput_mb_per_sec: f64,
    /// Against one naive unit with the same mode and settings.
    pub speedup_vs_naive1: f64,
    pub report: SimReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelCell {
    pub kernel: KernelKind,
    pub avg: f64,
    pub min: u64,
    pub max: u64,
}

/// Compute cycles per kernel for one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTableRow {
    pub method: Method,
    pub profile: String,
    pub kernels: Vec<KernelCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub rows: Vec<ExperimentRow>,
    pub kernel_table: Vec<KernelTableRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOptions {
    /// Mesh, PLIO, contention, FIFO and transfer settings. Its mode,
    /// profiles, workload and seed are replaced per run.
    pub base: RunSettings,
    pub modes: Vec<SimMode>,
    /// Profiles used instead of the preset's source for these methods.
    pub profile_overrides: BTreeMap<Method, KernelCostProfile>,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            base: RunSettings::calibrated(),
            modes: vec![SimMode::Analytic, SimMode::Event],
            profile_overrides: BTreeMap::new(),
        }
    }
}

impl ExperimentOptions {
    pub fn with_modes(mut self, modes: &[SimMode]) -> Self {
        self.modes = modes.to_vec();
        self
    }
}

/// Runs every preset in every requested mode.
pub fn run_presets(
    name: &str,
    presets: &[ExperimentPreset],
    options: &ExperimentOptions,
) -> Result<ExperimentReport, ExperimentError> {
    let mut rows = Vec::new();
    let mut profiles_cache: BTreeMap<(String, u64), BTreeMap<Method, KernelCostProfile>> = BTreeMap::new();
    for preset in presets {
        let key = (format!("{:?}", preset.profile), preset.seed);
        if !profiles_cache.contains_key(&key) {
            let mut profiles = resolve_profiles(preset.profile, preset.seed)?;
            profiles.extend(options.profile_overrides.clone());
            profiles_cache.insert(key.clone(), profiles);
        }
        let wrap = |source| ExperimentError::Sim { preset: preset.name.clone(), source };
        for &mode in &options.modes {
            let settings = RunSettings {
                mode,
                profiles: profiles_cache[&key].clone(),
                workload: preset.workload,
                seed: preset.seed,
                ..options.base.clone()
            };
            let baseline = settings.run(Method::Naive, 1).map_err(wrap)?.throughput_bytes_per_sec;
            for &units in &preset.unit_counts {
                let report = settings.run(preset.method, units).map_err(wrap)?;
                rows.push(ExperimentRow {
                    preset: preset.name.clone(),
                    method: preset.method,
                    n_units: units,
                    mode,
                    throughput_mb_per_sec: report.throughput_mb_per_sec(),
                    speedup_vs_naive1: report.throughput_bytes_per_sec / baseline,
                    report,
                });
            }
        }
    }
    let kernel_table = kernel_table(&rows);
    Ok(ExperimentReport { name: name.to_string(), rows, kernel_table })
}

/// One preset in both modes with default options.
pub fn run_experiment(preset: &ExperimentPreset) -> Result<ExperimentReport, ExperimentError> {
    run_presets(&preset.name, std::slice::from_ref(preset), &ExperimentOptions::default())
}

/// One row per method, taken from its first analytic run if any.
fn kernel_table(rows: &[ExperimentRow]) -> Vec<KernelTableRow> {
    let mut table: Vec<KernelTableRow> = Vec::new();
    let mut ordered: Vec<&ExperimentRow> = rows.iter().filter(|r| r.mode == SimMode::Analytic).collect();
    ordered.extend(rows.iter().filter(|r| r.mode != SimMode::Analytic));
    for row in ordered {
        if table.iter().any(|t| t.method == row.method) {
            continue;
        }
        let mut kernels: Vec<KernelCell> = row
            .report
            .kernels
            .iter()
            .map(|k| KernelCell {
                kernel: k.kernel,
                avg: k.compute_avg_cycles,
                min: k.compute_min_cycles,
                max: k.compute_max_cycles,
            })
            .collect();
        kernels.sort_by_key(|c| KernelKind::TABLE_ORDER.iter().position(|&k| k == c.kernel));
        table.push(KernelTableRow { method: row.method, profile: row.report.profile.clone(), kernels });
    }
    table.sort_by_key(|t| t.method);
    table
}

impl KernelTableRow {
    pub fn avg(&self, kernel: KernelKind) -> Option<f64> {
        self.kernels.iter().find(|c| c.kernel == kernel).map(|c| c.avg)
    }

    /// Averages in the published column order; `None` for kernels the
    /// method does not run.
    pub fn avg_row(&self) -> [Option<f64>; 7] {
        KernelKind::TABLE_ORDER.map(|k| self.avg(k))
    }
}

#[derive(Debug, Serialize)]
struct SummaryCsvRow<'a> {
    preset: &'a str,
    method: Method,
    n_units: usize,
    mode: SimMode,
    interface: String,
    n_gaussians: usize,
    total_cycles: f64,
    throughput_bytes_per_sec: f64,
    throughput_mb_per_sec: f64,
    speedup_vs_naive1: f64,
    effective_parallel_efficiency: f64,
    bottleneck_kernel: KernelKind,
}

#[derive(Debug, Serialize)]
struct KernelCsvRow<'a> {
    preset: &'a str,
    method: Method,
    n_units: usize,
    mode: SimMode,
    kernel: KernelKind,
    avg_cycles: f64,
    min_cycles: u64,
    max_cycles: u64,
    compute_avg_cycles: f64,
    compute_min_cycles: u64,
    compute_max_cycles: u64,
    busy_cycles: u64,
    stall_cycles: u64,
}

fn csv_string<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

impl ExperimentReport {
    pub fn summary_csv(&self) -> Result<String, csv::Error> {
        csv_string(self.rows.iter().map(|r| SummaryCsvRow {
            preset: &r.preset,
            method: r.method,
            n_units: r.n_units,
            mode: r.mode,
            interface: r.report.interface.to_string(),
            n_gaussians: r.report.n_gaussians,
            total_cycles: r.report.total_cycles,
            throughput_bytes_per_sec: r.report.throughput_bytes_per_sec,
            throughput_mb_per_sec: r.throughput_mb_per_sec,
            speedup_vs_naive1: r.speedup_vs_naive1,
            effective_parallel_efficiency: r.report.effective_parallel_efficiency,
            bottleneck_kernel: r.report.bottleneck_kernel,
        }))
    }

    pub fn kernels_csv(&self) -> Result<String, csv::Error> {
        csv_string(self.rows.iter().flat_map(|r| {
            r.report.kernels.iter().map(move |k| KernelCsvRow {
                preset: &r.preset,
                method: r.method,
                n_units: r.n_units,
                mode: r.mode,
                kernel: k.kernel,
                avg_cycles: k.avg_cycles,
                min_cycles: k.min_cycles,
                max_cycles: k.max_cycles,
                compute_avg_cycles: k.compute_avg_cycles,
                compute_min_cycles: k.compute_min_cycles,
                compute_max_cycles: k.compute_max_cycles,
                busy_cycles: k.busy_cycles,
                stall_cycles: k.stall_cycles,
            })
        }))
    }

    /// Compute cycles per kernel, one row per method, `avg (min-max)`.
    pub fn kernel_table_markdown(&self) -> String {
        let mut out = String::from("| Method |");
        for k in KernelKind::TABLE_ORDER {
            let _ = write!(out, " {k} |");
        }
        out.push_str("\n|---|");
        out.push_str(&"---|".repeat(KernelKind::TABLE_ORDER.len()));
        out.push('\n');
        for row in &self.kernel_table {
            let _ = write!(out, "| {} |", capitalize(row.method.name()));
            for k in KernelKind::TABLE_ORDER {
                match row.kernels.iter().find(|c| c.kernel == k) {
                    Some(c) => {
                        let _ = write!(out, " {} |", format_cell(c));
                    }
                    None => out.push_str(" - |"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn summary_markdown(&self) -> String {
        let mut out = String::from(
            "| Preset | Mode | Units | Throughput (MB/s) | Speedup vs naive-1 | Efficiency | Bottleneck |\n\
             |---|---|---|---|---|---|---|\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {:.2} | {:.2} | {:.3} | {} |",
                r.preset,
                r.mode,
                r.n_units,
                r.throughput_mb_per_sec,
                r.speedup_vs_naive1,
                r.report.effective_parallel_efficiency,
                r.report.bottleneck_kernel
            );
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// Writes `<name>.json`, `<name>_summary.csv`, `<name>_kernels.csv` and
    /// `<name>_table.md` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
        fs::create_dir_all(dir)?;
        let files = [
            (format!("{}.json", self.name), self.to_json()? + "\n"),
            (format!("{}_summary.csv", self.name), self.summary_csv()?),
            (format!("{}_kernels.csv", self.name), self.kernels_csv()?),
            (
                format!("{}_table.md", self.name),
                format!("{}\n{}", self.kernel_table_markdown(), self.summary_markdown()),
            ),
        ];
        let mut written = Vec::with_capacity(files.len());
        for (file, body) in files {
            let path = dir.join(file);
            fs::write(&path, body)?;
            written.push(path);
        }
        Ok(written)
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    chars.next().map(|c| c.to_ascii_uppercase().to_string() + chars.as_str()).unwrap_or_default()
}

fn format_avg(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.1}")
    }
}

fn format_cell(c: &KernelCell) -> String {
    if c.min == c.max {
        format_avg(c.avg)
    } else {
        format!("{} ({}-{})", format_avg(c.avg), c.min, c.max)
    }
}
