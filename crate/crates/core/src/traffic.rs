//! Active-source workload and the windowed load observations fed to the router.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::TrafficError;
use crate::topology::{NodeId, NodeKind, Partition, Topology};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurstParams {
    pub period_s: f64,
    pub duty: f64,
    pub phase_s: f64,
}

impl BurstParams {
    /// Whether the on/off modulation is in its on phase at `t`.
    pub fn is_on(&self, t: f64) -> bool {
        (t + self.phase_s).rem_euclid(self.period_s) < self.duty * self.period_s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub flow_id: usize,
    pub src: NodeId,
    pub dst: NodeId,
    pub rate_bps: f64,
    pub burst: Option<BurstParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BurstConfig {
    pub enabled: bool,
    pub period_s: f64,
    pub duty: f64,
}

impl Default for BurstConfig {
    fn default() -> Self {
        BurstConfig {
            enabled: false,
            period_s: 60.0,
            duty: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    pub n_sources: usize,
    pub rate_bps: f64,
    pub seed: u64,
    pub burst: BurstConfig,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            n_sources: 1600,
            rate_bps: 2e6,
            seed: 1,
            burst: BurstConfig::default(),
        }
    }
}

/// Draws `n` distinct left ground sources and pairs each with a distinct right
/// ground destination.
pub fn select_active_sources(
    topo: &Topology,
    n: usize,
    seed: u64,
    cfg: &TrafficConfig,
) -> Result<Vec<Flow>, TrafficError> {
    if !(cfg.rate_bps.is_finite() && cfg.rate_bps > 0.0) {
        return Err(TrafficError::InvalidParam(format!("rate_bps = {}", cfg.rate_bps)));
    }
    if cfg.burst.enabled && !(cfg.burst.period_s > 0.0 && cfg.burst.duty > 0.0 && cfg.burst.duty <= 1.0) {
        return Err(TrafficError::InvalidParam(format!(
            "burst period {} / duty {}",
            cfg.burst.period_s, cfg.burst.duty
        )));
    }
    let left = topo.nodes_on(NodeKind::Ground, Partition::Left);
    let right = topo.nodes_on(NodeKind::Ground, Partition::Right);
    let available = left.len().min(right.len());
    if n > available {
        return Err(TrafficError::TooManySources {
            requested: n,
            available,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut srcs = index::sample(&mut rng, left.len(), n).into_vec();
    srcs.sort_unstable();
    let dsts = index::sample(&mut rng, right.len(), n).into_vec();

    Ok(srcs
        .into_iter()
        .zip(dsts)
        .enumerate()
        .map(|(flow_id, (s, d))| Flow {
            flow_id,
            src: left[s],
            dst: right[d],
            rate_bps: cfg.rate_bps,
            burst: cfg.burst.enabled.then(|| BurstParams {
                period_s: cfg.burst.period_s,
                duty: cfg.burst.duty,
                phase_s: rng.gen_range(0.0..cfg.burst.period_s),
            }),
        })
        .collect())
}

pub fn instantaneous_rate(flow: &Flow, t: f64) -> f64 {
    match flow.burst {
        None => flow.rate_bps,
        Some(b) if b.is_on(t) => flow.rate_bps / b.duty,
        Some(_) => 0.0,
    }
}

/// Per-interval offered egress bits of the monitored satellites.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadTrace {
    interval_s: f64,
    /// Normalizing egress capacity per monitored row.
    capacity_bps: Vec<f64>,
    /// Completed intervals, oldest first: (end time, bits per row).
    intervals: Vec<(f64, Vec<f64>)>,
}

impl LoadTrace {
    pub fn new(interval_s: f64, capacity_bps: Vec<f64>) -> Self {
        LoadTrace {
            interval_s,
            capacity_bps,
            intervals: Vec::new(),
        }
    }

    /// Uses each monitored node's largest egress link capacity for normalization.
    pub fn for_topology(topo: &Topology, interval_s: f64) -> Self {
        let caps = topo
            .monitored()
            .into_iter()
            .map(|n| {
                topo.neighbors(n)
                    .iter()
                    .map(|&(_, l)| topo.link(l).capacity_bps)
                    .max()
                    .unwrap_or(1) as f64
            })
            .collect();
        Self::new(interval_s, caps)
    }

    pub fn rows(&self) -> usize {
        self.capacity_bps.len()
    }

    pub fn interval_s(&self) -> f64 {
        self.interval_s
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn push_interval(&mut self, end_s: f64, bits: Vec<f64>) {
        assert_eq!(bits.len(), self.rows(), "load row count");
        self.intervals.push((end_s, bits));
    }

    /// Normalized load of one completed interval.
    pub fn normalized(&self, k: usize) -> Vec<f64> {
        let (_, bits) = &self.intervals[k];
        bits.iter()
            .zip(&self.capacity_bps)
            .map(|(b, c)| (b / (c * self.interval_s)).clamp(0.0, 1.0))
            .collect()
    }
}

/// Rows are monitored satellites, columns are intervals from oldest to newest.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficPattern {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
    pub interval_s: f64,
}

impl TrafficPattern {
    pub fn zeros(rows: usize, cols: usize, interval_s: f64) -> Self {
        TrafficPattern {
            rows,
            cols,
            data: vec![0.0; rows * cols],
            interval_s,
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.cols + col] = v;
    }
}

/// The last `window` intervals completed by `now`, left-padded with zeros.
pub fn observe_pattern(trace: &LoadTrace, now: f64, window: usize) -> TrafficPattern {
    let mut pat = TrafficPattern::zeros(trace.rows(), window, trace.interval_s);
    let done = trace.intervals.partition_point(|(end, _)| *end <= now + 1e-12);
    let take = done.min(window);
    for (j, k) in (done - take..done).enumerate() {
        let col = window - take + j;
        for (row, v) in trace.normalized(k).into_iter().enumerate() {
            pat.set(row, col, v);
        }
    }
    pat
}
