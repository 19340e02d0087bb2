//! Cycle-stepped model of each unit's kernel chain.
//!
//! Every link is a word FIFO (32-bit words). A kernel reads its whole input
//! at the interface rate, computes, then pushes its output downstream as
//! space allows. Cycles where nothing can move are skipped.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{stages, unit_share, KernelReport, SimConfig, SimError, SimMode, SimReport, Stage, RECORD_BYTES};
use crate::arch::InterfaceKind;
use crate::mapper::Placement;

const WORD_BYTES: u64 = 4;

fn words(bytes: u64) -> u64 {
    bytes.div_ceil(WORD_BYTES)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Idle,
    Reading { remaining: u64, started_now: bool },
    Computing { until: u64 },
    Pushing { remaining: u64 },
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    items: u64,
    occupancy_sum: u64,
    min: u64,
    max: u64,
    busy: u64,
    compute_min: u64,
    compute_max: u64,
    stall: u64,
}

impl Tally {
    fn record(&mut self, occupancy: u64) {
        if self.items == 0 {
            self.min = occupancy;
            self.max = occupancy;
        } else {
            self.min = self.min.min(occupancy);
            self.max = self.max.max(occupancy);
        }
        self.items += 1;
        self.occupancy_sum += occupancy;
    }

    fn merge(&mut self, other: &Tally) {
        if other.items > 0 {
            if self.items == 0 {
                self.min = other.min;
                self.max = other.max;
            } else {
                self.min = self.min.min(other.min);
                self.max = self.max.max(other.max);
            }
        }
        if other.busy > 0 {
            if self.busy == 0 {
                self.compute_min = other.compute_min;
                self.compute_max = other.compute_max;
            } else {
                self.compute_min = self.compute_min.min(other.compute_min);
                self.compute_max = self.compute_max.max(other.compute_max);
            }
        }
        self.items += other.items;
        self.occupancy_sum += other.occupancy_sum;
        self.busy += other.busy;
        self.stall += other.stall;
    }
}

struct StageState {
    stage: Stage,
    in_words: u64,
    out_words: u64,
    phase: Phase,
    started: usize,
    item_start: u64,
    tally: Tally,
}

struct Fifo {
    level: u64,
    capacity: u64,
}

impl Fifo {
    fn space(&self) -> u64 {
        self.capacity - self.level
    }
}

struct UnitSim<'a> {
    cfg: &'a SimConfig,
    stages: Vec<StageState>,
    /// `fifos[i]` feeds stage `i`.
    fifos: Vec<Fifo>,
    read_rate: u64,
    extra_stall: Vec<u64>,
    rng: ChaCha8Rng,
    items: usize,
    /// Cycle at which each of this unit's items has fully arrived at the
    /// PLIO boundary.
    releases: Vec<u64>,
    source_item: usize,
    source_remaining: u64,
    done: usize,
    last_done: u64,
}

impl<'a> UnitSim<'a> {
    fn new(cfg: &'a SimConfig, chain: &[Stage], unit: usize, releases: Vec<u64>) -> Self {
        let penalty = cfg.contention.stall_penalty(cfg.n_units);
        let capacity = |in_words: u64| match cfg.iface.kind {
            InterfaceKind::Window => 2 * in_words,
            InterfaceKind::Stream => cfg.iface.fifo_depth_words.max(1) as u64,
        };
        let stages: Vec<StageState> = chain
            .iter()
            .map(|&stage| StageState {
                stage,
                in_words: words(stage.in_bytes),
                out_words: words(stage.out_bytes),
                phase: Phase::Idle,
                started: 0,
                item_start: 0,
                tally: Tally::default(),
            })
            .collect();
        let fifos = stages.iter().map(|s| Fifo { level: 0, capacity: capacity(s.in_words) }).collect();
        let extra_stall = chain.iter().map(|s| (s.service() * penalty).round() as u64).collect();
        let read_rate = if cfg.charge_transfer { cfg.iface.read_words_per_cycle() } else { u64::MAX };
        let seed = cfg.seed ^ (unit as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        Self {
            cfg,
            source_remaining: stages[0].in_words,
            stages,
            fifos,
            read_rate,
            extra_stall,
            rng: ChaCha8Rng::seed_from_u64(seed),
            items: releases.len(),
            releases,
            source_item: 0,
            done: 0,
            last_done: 0,
        }
    }

    fn compute_cycles(&mut self, i: usize) -> u64 {
        let cost = self.stages[i].stage.cost;
        if self.cfg.jitter && cost.max > cost.min {
            self.rng.gen_range(cost.min..=cost.max)
        } else {
            (cost.avg.round() as u64).max(1)
        }
    }

    fn step_source(&mut self, t: u64) {
        if self.source_item >= self.items || self.releases[self.source_item] > t {
            return;
        }
        let push = self.source_remaining.min(self.fifos[0].space());
        self.fifos[0].level += push;
        self.source_remaining -= push;
        if self.source_remaining == 0 {
            self.source_item += 1;
            self.source_remaining = self.stages[0].in_words;
        }
    }

    fn step_stage(&mut self, i: usize, t: u64) {
        let last = i + 1 == self.stages.len();
        if self.stages[i].phase == Phase::Idle {
            if self.stages[i].started >= self.items || self.fifos[i].level == 0 {
                return;
            }
            let s = &mut self.stages[i];
            s.started += 1;
            s.item_start = t;
            s.phase = Phase::Reading { remaining: s.in_words, started_now: true };
        }
        if let Phase::Reading { remaining, started_now } = self.stages[i].phase {
            let take = remaining.min(self.read_rate).min(self.fifos[i].level);
            self.fifos[i].level -= take;
            let remaining = remaining - take;
            if take == 0 {
                self.stages[i].tally.stall += 1;
            }
            if remaining > 0 {
                self.stages[i].phase = Phase::Reading { remaining, started_now: false };
                return;
            }
            let compute = self.compute_cycles(i);
            let extra = self.extra_stall[i];
            let s = &mut self.stages[i];
            if s.tally.busy == 0 {
                s.tally.compute_min = compute;
                s.tally.compute_max = compute;
            } else {
                s.tally.compute_min = s.tally.compute_min.min(compute);
                s.tally.compute_max = s.tally.compute_max.max(compute);
            }
            s.tally.busy += compute;
            s.tally.stall += extra;
            // an unmetered read finishing in its first cycle costs nothing
            let instant = started_now && self.read_rate == u64::MAX;
            s.phase = Phase::Computing { until: t + compute + extra - u64::from(instant) };
            return;
        }
        if let Phase::Computing { until } = self.stages[i].phase {
            if t < until {
                return;
            }
            self.stages[i].phase = Phase::Pushing { remaining: self.stages[i].out_words };
        }
        if let Phase::Pushing { remaining } = self.stages[i].phase {
            let push = if last { remaining } else { remaining.min(self.fifos[i + 1].space()) };
            if !last {
                self.fifos[i + 1].level += push;
            }
            let remaining = remaining - push;
            let s = &mut self.stages[i];
            if remaining > 0 {
                s.tally.stall += 1;
                s.phase = Phase::Pushing { remaining };
                return;
            }
            let occupancy = t - s.item_start + 1;
            s.tally.record(occupancy);
            s.phase = Phase::Idle;
            if last {
                self.done += 1;
                self.last_done = t;
            }
        }
    }

    /// Whether the next cycle can move data without waiting on a timer.
    fn active(&self, t: u64) -> bool {
        let n = self.stages.len();
        let source = self.source_item < self.items
            && self.releases[self.source_item] <= t + 1
            && self.fifos[0].space() > 0;
        source
            || self.stages.iter().enumerate().any(|(i, s)| match s.phase {
                Phase::Idle => s.started < self.items && self.fifos[i].level > 0,
                Phase::Reading { .. } => self.fifos[i].level > 0,
                Phase::Computing { .. } => false,
                Phase::Pushing { .. } => i + 1 == n || self.fifos[i + 1].space() > 0,
            })
    }

    fn next_timer(&self, t: u64) -> Option<u64> {
        let compute = self.stages.iter().filter_map(|s| match s.phase {
            Phase::Computing { until } if until > t => Some(until),
            _ => None,
        });
        let release = self.releases.get(self.source_item).copied().filter(|&r| r > t);
        compute.chain(release).min()
    }

    /// Per-stage tallies and the cycle count until the last output left.
    fn run(mut self) -> (Vec<Tally>, u64) {
        let mut t = 0u64;
        while self.done < self.items {
            self.step_source(t);
            for i in (0..self.stages.len()).rev() {
                self.step_stage(i, t);
            }
            if self.done == self.items {
                break;
            }
            let next = if self.active(t) {
                t + 1
            } else {
                self.next_timer(t).expect("a stalled unit always has a pending timer")
            };
            let skipped = next - t - 1;
            if skipped > 0 {
                for s in &mut self.stages {
                    if matches!(s.phase, Phase::Reading { .. } | Phase::Pushing { .. }) {
                        s.tally.stall += skipped;
                    }
                }
            }
            t = next;
        }
        (self.stages.into_iter().map(|s| s.tally).collect(), self.last_done + 1)
    }
}

/// Release cycles for every Gaussian, dealt round-robin to units. Item `j`
/// has fully arrived once `(j + 1) * 236` bytes have crossed the input link.
fn release_schedule(cfg: &SimConfig, sink_bytes: u64) -> Vec<Vec<u64>> {
    let limit = cfg.plio.input_limit(RECORD_BYTES, sink_bytes);
    let per_item = RECORD_BYTES as f64 * cfg.mesh.clock_hz / limit;
    let mut out: Vec<Vec<u64>> =
        (0..cfg.n_units).map(|u| Vec::with_capacity(unit_share(cfg.n_gaussians, cfg.n_units, u))).collect();
    for j in 0..cfg.n_gaussians {
        let release = (((j + 1) as f64 * per_item).floor() as u64).saturating_sub(per_item.floor() as u64);
        out[j % cfg.n_units].push(release);
    }
    out
}

pub fn simulate_event(cfg: &SimConfig, placement: &Placement) -> Result<SimReport, SimError> {
    cfg.validate(placement)?;
    let chain = stages(cfg, placement)?;
    let releases = release_schedule(cfg, placement.graph.sink_bytes());

    let runs: Vec<(Vec<Tally>, u64)> = releases
        .into_iter()
        .enumerate()
        .filter(|(_, r)| !r.is_empty())
        .map(|(unit, r)| UnitSim::new(cfg, &chain, unit, r).run())
        .collect();

    let mut totals = vec![Tally::default(); chain.len()];
    let mut total_cycles = 0u64;
    for (tallies, cycles) in &runs {
        for (acc, t) in totals.iter_mut().zip(tallies) {
            acc.merge(t);
        }
        total_cycles = total_cycles.max(*cycles);
    }

    let clock = cfg.mesh.clock_hz;
    let throughput = cfg.n_gaussians as f64 * RECORD_BYTES as f64 * clock / total_cycles as f64;
    let slowest = chain
        .iter()
        .max_by(|a, b| a.service().total_cmp(&b.service()))
        .expect("task graphs are never empty");
    let ideal = cfg.n_units as f64 * RECORD_BYTES as f64 * clock / slowest.service();

    let kernels = chain
        .iter()
        .zip(&totals)
        .map(|(s, t)| KernelReport {
            kernel: s.kernel,
            avg_cycles: t.occupancy_sum as f64 / t.items as f64,
            min_cycles: t.min,
            max_cycles: t.max,
            compute_avg_cycles: t.busy as f64 / t.items as f64,
            compute_min_cycles: t.compute_min,
            compute_max_cycles: t.compute_max,
            busy_cycles: t.busy,
            stall_cycles: t.stall,
        })
        .collect::<Vec<_>>();
    let bottleneck = kernels
        .iter()
        .max_by(|a, b| a.avg_cycles.total_cmp(&b.avg_cycles))
        .map(|k| k.kernel)
        .expect("task graphs are never empty");

    Ok(SimReport {
        mode: SimMode::Event,
        interface: cfg.iface.kind,
        profile: cfg.profile.name.clone(),
        n_units: cfg.n_units,
        n_gaussians: cfg.n_gaussians,
        clock_hz: clock,
        total_cycles: total_cycles as f64,
        throughput_bytes_per_sec: throughput,
        output_bytes_per_sec: throughput * placement.graph.sink_bytes() as f64 / RECORD_BYTES as f64,
        effective_parallel_efficiency: throughput / ideal,
        bottleneck_kernel: bottleneck,
        kernels,
    })
}
