//! Flow-level evaluation of a path combination.
//!
//! Each OD demand is pushed along its satellite-segment path. A link offered
//! more than its capacity passes the fraction `capacity / offered` of every
//! flow crossing it, and downstream links see the thinned rates. The survival
//! fractions are iterated to a fixed point.

use super::MetricsReport;
use crate::error::{NeuralError, SimError};
use crate::neural::{build_input, CombinationOracle, Tensor};
use crate::routing::{CombinationSpace, OdDemands, PathCombination};
use crate::topology::{LinkId, Topology};
use crate::traffic::TrafficPattern;

const MAX_ITERS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct FluidState {
    /// Offered rate per directed link, bits/s.
    pub offered_bps: Vec<f64>,
    /// Fraction of offered traffic each link passes.
    pub survival: Vec<f64>,
    pub total_bps: f64,
    pub delivered_bps: f64,
    /// Delivered-rate-weighted propagation delay of the segment paths.
    pub mean_delay_s: f64,
    pub iterations: usize,
}

impl FluidState {
    pub fn carried_bps(&self, link: LinkId) -> f64 {
        self.offered_bps[link.index()] * self.survival[link.index()]
    }
}

fn path_links(
    topo: &Topology,
    combo: &PathCombination,
    demands: &OdDemands,
) -> Result<Vec<(f64, Vec<LinkId>)>, SimError> {
    demands
        .iter()
        .filter(|(_, &d)| d > 0.0)
        .map(|(od, &d)| {
            if od.origin == od.destination {
                return Ok((d, Vec::new()));
            }
            let path = combo
                .assignment
                .get(od)
                .ok_or_else(|| SimError::MissingPath(od.to_string()))?;
            let links = path
                .nodes
                .windows(2)
                .enumerate()
                .map(|(hop, w)| {
                    topo.link_between(w[0], w[1]).ok_or(SimError::InvalidRoute {
                        flow: 0,
                        hop,
                        from: w[0],
                        to: w[1],
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok((d, links))
        })
        .collect()
}

pub fn fluid_state(topo: &Topology, demands: &OdDemands, combo: &PathCombination) -> Result<FluidState, SimError> {
    for (od, &d) in demands {
        if !(d.is_finite() && d >= 0.0) {
            return Err(SimError::InvalidParam(format!("demand {d} for {od}")));
        }
    }
    let paths = path_links(topo, combo, demands)?;
    let n = topo.links().len();
    let cap: Vec<f64> = topo.links().iter().map(|l| l.capacity_bps as f64).collect();
    let mut survival = vec![1.0; n];
    let mut offered = vec![0.0; n];
    let mut iterations = 0;
    loop {
        iterations += 1;
        offered.iter_mut().for_each(|o| *o = 0.0);
        for (d, links) in &paths {
            let mut r = *d;
            for l in links {
                offered[l.index()] += r;
                r *= survival[l.index()];
            }
        }
        let mut change: f64 = 0.0;
        for i in 0..n {
            let s = if offered[i] > cap[i] { cap[i] / offered[i] } else { 1.0 };
            change = change.max((s - survival[i]).abs());
            survival[i] = s;
        }
        if change < 1e-12 || iterations >= MAX_ITERS {
            break;
        }
    }

    let mut total = 0.0;
    let mut delivered = 0.0;
    let mut delay_weight = 0.0;
    for (d, links) in &paths {
        let s: f64 = links.iter().map(|l| survival[l.index()]).product();
        let prop: f64 = links.iter().map(|&l| topo.link(l).prop_delay_s()).sum();
        total += d;
        delivered += d * s;
        delay_weight += d * s * prop;
    }
    Ok(FluidState {
        offered_bps: offered,
        survival,
        total_bps: total,
        delivered_bps: delivered,
        mean_delay_s: if delivered > 0.0 { delay_weight / delivered } else { 0.0 },
        iterations,
    })
}

/// One second of steady-state traffic under `combo`.
pub fn run_fluid_eval(
    topo: &Topology,
    demands: &OdDemands,
    combo: &PathCombination,
) -> Result<MetricsReport, SimError> {
    let st = fluid_state(topo, demands, combo)?;
    let util = topo
        .links()
        .iter()
        .enumerate()
        .map(|(i, l)| (st.offered_bps[i] * st.survival[i] / l.capacity_bps as f64).min(1.0))
        .collect();
    let delivered = st.delivered_bps.min(st.total_bps);
    let mut report = MetricsReport::from_totals(
        1.0,
        st.total_bps,
        delivered,
        st.total_bps - delivered,
        0.0,
        st.mean_delay_s,
        util,
    );
    // 1 - delivered/total, without the subtraction round trip
    report.loss_rate = if st.total_bps > 0.0 {
        (1.0 - delivered / st.total_bps).max(0.0)
    } else {
        0.0
    };
    Ok(report)
}

/// Fluid evaluator over the combination space of one topology, used to label
/// offline training samples.
#[derive(Debug, Clone)]
pub struct FluidOracle {
    topo: Topology,
    space: CombinationSpace,
    window: usize,
    /// Egress links of each monitored satellite, in feature-row order.
    egress: Vec<Vec<LinkId>>,
    norm_bps: Vec<f64>,
}

impl FluidOracle {
    pub fn new(topo: &Topology, window: usize) -> Result<Self, SimError> {
        if window == 0 {
            return Err(SimError::InvalidParam("window must be positive".into()));
        }
        let space = CombinationSpace::new(topo)?;
        let monitored = topo.monitored();
        let egress: Vec<Vec<LinkId>> = monitored
            .iter()
            .map(|&m| topo.neighbors(m).iter().map(|&(_, l)| l).collect())
            .collect();
        let norm_bps = egress
            .iter()
            .map(|ls| ls.iter().map(|&l| topo.link(l).capacity_bps).max().unwrap_or(1) as f64)
            .collect();
        Ok(FluidOracle {
            topo: topo.clone(),
            space,
            window,
            egress,
            norm_bps,
        })
    }

    pub fn space(&self) -> &CombinationSpace {
        &self.space
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Normalized egress load and remaining-buffer estimate per monitored
    /// satellite. Traffic leaving a destination MEO toward its access tree
    /// counts as that MEO's egress.
    pub fn observation(&self, demand: &OdDemands, combo: usize) -> Result<(Vec<f64>, Vec<f64>), SimError> {
        let st = fluid_state(&self.topo, demand, self.space.combo(combo))?;
        let mut down = vec![0.0; self.topo.node_count()];
        for (od, &d) in demand {
            let s: f64 = if od.origin == od.destination {
                1.0
            } else {
                let path = &self.space.combo(combo).assignment[od];
                path.nodes
                    .windows(2)
                    .map(|w| st.survival[self.topo.link_between(w[0], w[1]).expect("validated").index()])
                    .product()
            };
            down[od.destination.index()] += d * s;
        }
        let monitored = self.topo.monitored();
        let mut load = Vec::with_capacity(monitored.len());
        let mut buffers = Vec::with_capacity(monitored.len());
        for ((m, links), norm) in monitored.iter().zip(&self.egress).zip(&self.norm_bps) {
            let bits: f64 = links.iter().map(|l| st.offered_bps[l.index()]).sum::<f64>() + down[m.index()];
            load.push((bits / norm).clamp(0.0, 1.0));
            let (full, total) = links.iter().fold((0u64, 0u64), |(f, t), &l| {
                let link = self.topo.link(l);
                let over = st.offered_bps[l.index()] > link.capacity_bps as f64;
                (
                    f + if over { link.buffer_pkts as u64 } else { 0 },
                    t + link.buffer_pkts as u64,
                )
            });
            buffers.push(if total == 0 {
                1.0
            } else {
                1.0 - full as f64 / total as f64
            });
        }
        Ok((load, buffers))
    }
}

fn oracle_err(e: SimError) -> NeuralError {
    NeuralError::Oracle(e.to_string())
}

impl CombinationOracle for FluidOracle {
    type Demand = OdDemands;

    fn combinations(&self) -> usize {
        self.space.len()
    }

    fn evaluate(&self, demand: &OdDemands, combo: usize) -> Result<MetricsReport, NeuralError> {
        run_fluid_eval(&self.topo, demand, self.space.combo(combo)).map_err(oracle_err)
    }

    fn features(&self, demand: &OdDemands, current: usize, history: usize) -> Result<Tensor<f64>, NeuralError> {
        let (load, buffers) = self.observation(demand, current).map_err(oracle_err)?;
        let mut pattern = TrafficPattern::zeros(load.len(), self.window, 1.0);
        let history = history.min(self.window);
        for (row, &v) in load.iter().enumerate() {
            for col in self.window - history..self.window {
                pattern.set(row, col, v);
            }
        }
        build_input(&pattern, &buffers)
    }
}
