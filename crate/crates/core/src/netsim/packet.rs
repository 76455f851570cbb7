//! Event-driven store-and-forward simulation with drop-tail queues.
//!
//! Time is kept in integer nanoseconds. Each directed link is a FIFO served
//! at its capacity; because service is deterministic, a queue is represented
//! by the departure times of the packets it holds, so the only events are
//! packet generation, arrival at a node, and the per-interval decision tick.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MetricsReport;
use crate::error::SimError;
use crate::neural::build_input;
use crate::routing::{combo_route, sp_routes, CombinationSpace, RoutingPolicy};
use crate::topology::{LinkId, Path, Topology};
use crate::traffic::{observe_pattern, Flow, LoadTrace};

const NS: f64 = 1e9;

fn to_ns(s: f64) -> u64 {
    (s * NS).round() as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunParams {
    pub duration_s: f64,
    /// Packets created before this time are excluded from the metrics.
    pub warmup_s: f64,
    pub packet_bits: u64,
    /// Load observation and routing decision period.
    pub interval_s: f64,
    /// Number of intervals in an observed traffic pattern.
    pub window: usize,
    pub seed: u64,
}

impl Default for RunParams {
    fn default() -> Self {
        RunParams {
            duration_s: 60.0,
            warmup_s: 5.0,
            packet_bits: 12_000,
            interval_s: 1.0,
            window: 16,
            seed: 1,
        }
    }
}

impl RunParams {
    fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidParam(m));
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return bad(format!("duration_s = {}", self.duration_s));
        }
        if !(self.warmup_s >= 0.0 && self.warmup_s < self.duration_s) {
            return bad(format!("warmup_s = {} must lie in [0, duration)", self.warmup_s));
        }
        if self.packet_bits == 0 {
            return bad("packet_bits must be positive".into());
        }
        if !(self.interval_s.is_finite() && self.interval_s > 0.0) {
            return bad(format!("interval_s = {}", self.interval_s));
        }
        if self.window == 0 {
            return bad("window must be positive".into());
        }
        Ok(())
    }
}

/// FIFO occupancy of one directed link.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QueueState {
    /// Transmission completion times of queued packets, non-decreasing.
    departures: VecDeque<u64>,
    pub busy_until: u64,
    pub drops: u64,
    pub capacity: u32,
}

impl QueueState {
    pub fn new(capacity: u32) -> Self {
        QueueState {
            capacity,
            ..Default::default()
        }
    }

    /// Packets still queued or in transmission at `now`.
    pub fn occupancy(&self, now: u64) -> usize {
        self.departures.len() - self.departures.partition_point(|&d| d <= now)
    }

    /// Adds `n` packets that stay queued until `until` (for synthetic states).
    pub fn occupy(&mut self, until: u64, n: usize) {
        assert!(self.departures.back().is_none_or(|&d| d <= until));
        self.departures.extend(std::iter::repeat_n(until, n));
        self.busy_until = self.busy_until.max(until);
    }

    fn purge(&mut self, now: u64) {
        while self.departures.front().is_some_and(|&d| d <= now) {
            self.departures.pop_front();
        }
    }
}

/// Queue state of a run plus what is needed to summarize it per satellite.
#[derive(Debug, Clone)]
pub struct SimState {
    pub now_ns: u64,
    pub queues: Vec<QueueState>,
    /// Egress links of each monitored satellite, in feature-row order.
    monitored_egress: Vec<Vec<LinkId>>,
}

impl SimState {
    pub fn idle(topo: &Topology) -> Self {
        let queues = topo.links().iter().map(|l| QueueState::new(l.buffer_pkts)).collect();
        let monitored_egress = topo
            .monitored()
            .into_iter()
            .map(|n| topo.neighbors(n).iter().map(|&(_, l)| l).collect())
            .collect();
        SimState {
            now_ns: 0,
            queues,
            monitored_egress,
        }
    }
}

/// Remaining buffer fraction of each monitored satellite, aggregated over its
/// egress queues.
pub fn buffer_snapshot(state: &SimState) -> Vec<f64> {
    state
        .monitored_egress
        .iter()
        .map(|links| {
            let (used, total) = links.iter().fold((0usize, 0usize), |(u, t), l| {
                let q = &state.queues[l.index()];
                (u + q.occupancy(state.now_ns), t + q.capacity as usize)
            });
            if total == 0 {
                1.0
            } else {
                (1.0 - used as f64 / total as f64).clamp(0.0, 1.0)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    Generate(u32),
    Arrive(u32),
    Tick,
}

#[derive(Debug, Clone, Copy)]
struct Packet {
    flow: u32,
    route: u32,
    /// Index of the link being traversed.
    hop: u16,
    /// Created inside the measurement window.
    counted: bool,
    interval: u32,
    created: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct IntervalCount {
    generated: u64,
    delivered: u64,
    dropped: u64,
}

#[derive(Debug, Clone, Copy)]
struct Emission {
    gap_ns: u64,
    /// (period, on-length, phase) in ns for bursty flows.
    burst: Option<(u64, u64, u64)>,
}

impl Emission {
    fn for_flow(flow: &Flow, packet_bits: u64) -> Self {
        let on_rate = match flow.burst {
            Some(b) => flow.rate_bps / b.duty,
            None => flow.rate_bps,
        };
        Emission {
            gap_ns: ((packet_bits as f64 * NS / on_rate).round() as u64).max(1),
            burst: flow.burst.map(|b| {
                let period = to_ns(b.period_s).max(1);
                (period, to_ns(b.duty * b.period_s), to_ns(b.phase_s) % period)
            }),
        }
    }

    /// First emission time at or after `t` that falls in an on phase.
    fn align(&self, t: u64) -> u64 {
        match self.burst {
            None => t,
            Some((period, on, phase)) => {
                let pos = (t + phase) % period;
                if pos < on {
                    t
                } else {
                    t + (period - pos)
                }
            }
        }
    }
}

/// Extra observations collected alongside the metrics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimDiagnostics {
    pub events: u64,
    /// Delivered packets that arrived after a later-created packet of the same flow.
    pub reordered: u64,
    /// Drops per directed link over the whole run.
    pub link_drops: Vec<u64>,
    pub conservation_checks: u64,
    /// Combination in force after each decision tick (deep-learning policy).
    pub decisions: Vec<usize>,
    /// Smallest and largest remaining-buffer fraction seen at any tick.
    pub buffer_range: Option<(f64, f64)>,
}

pub struct Simulator<'a> {
    topo: &'a Topology,
    flows: &'a [Flow],
    params: RunParams,
    end: u64,
    warmup: u64,
    interval_ns: u64,

    heap: BinaryHeap<Reverse<(u64, u64, Event)>>,
    seq: u64,
    packets: Vec<Packet>,
    free: Vec<u32>,

    routes: Vec<Vec<LinkId>>,
    flow_route: Vec<u32>,
    /// Route-table offset of each combination (deep-learning policy).
    combo_base: Vec<u32>,
    space: Option<CombinationSpace>,
    emission: Vec<Emission>,

    tx_ns: Vec<u64>,
    state: SimState,
    busy_ns: Vec<u64>,
    offered_bits: Vec<u64>,
    trace: LoadTrace,

    // whole-run packet counts
    generated: u64,
    delivered: u64,
    dropped: u64,
    // measurement-window packet counts
    w_generated: u64,
    w_delivered: u64,
    w_dropped: u64,
    w_delay_ns: u128,
    intervals: Vec<IntervalCount>,
    last_created: Vec<u64>,
    diag: SimDiagnostics,
    drop_log: Option<&'a mut dyn Write>,
}

fn route_links(topo: &Topology, flow: &Flow, path: &Path) -> Result<Vec<LinkId>, SimError> {
    if path.nodes.len() < 2 || path.first() != flow.src || path.last() != flow.dst {
        return Err(SimError::RouteEndpoints { flow: flow.flow_id });
    }
    if path.hops() > u16::MAX as usize {
        return Err(SimError::InvalidParam(format!(
            "route of flow {} too long",
            flow.flow_id
        )));
    }
    path.nodes
        .windows(2)
        .enumerate()
        .map(|(hop, w)| {
            topo.link_between(w[0], w[1]).ok_or(SimError::InvalidRoute {
                flow: flow.flow_id,
                hop,
                from: w[0],
                to: w[1],
            })
        })
        .collect()
}

impl<'a> Simulator<'a> {
    pub fn new(
        topo: &'a Topology,
        flows: &'a [Flow],
        policy: &RoutingPolicy,
        params: RunParams,
    ) -> Result<Self, SimError> {
        params.validate()?;
        for f in flows {
            if !(f.rate_bps.is_finite() && f.rate_bps > 0.0) {
                return Err(SimError::InvalidParam(format!(
                    "flow {} rate {}",
                    f.flow_id, f.rate_bps
                )));
            }
        }
        let mut routes = Vec::new();
        let mut combo_base = Vec::new();
        let mut space = None;
        let resolve = |paths: Vec<Path>, routes: &mut Vec<Vec<LinkId>>| -> Result<(), SimError> {
            if paths.len() != flows.len() {
                return Err(SimError::RouteCount {
                    expected: flows.len(),
                    got: paths.len(),
                });
            }
            for (f, p) in flows.iter().zip(&paths) {
                routes.push(route_links(topo, f, p)?);
            }
            Ok(())
        };
        match policy {
            RoutingPolicy::ShortestPath => resolve(sp_routes(topo, flows)?, &mut routes)?,
            RoutingPolicy::Explicit(paths) => resolve(paths.clone(), &mut routes)?,
            RoutingPolicy::Fixed(c) => {
                let s = CombinationSpace::new(topo)?;
                if *c >= s.len() {
                    return Err(SimError::InvalidParam(format!("combination {c} of {}", s.len())));
                }
                let paths = flows
                    .iter()
                    .map(|f| combo_route(topo, f, s.combo(*c)))
                    .collect::<Result<Vec<_>, _>>()?;
                resolve(paths, &mut routes)?;
            }
            RoutingPolicy::DeepLearning(_) => {
                let s = CombinationSpace::new(topo)?;
                for combo in s.combos() {
                    combo_base.push(routes.len() as u32);
                    let paths = flows
                        .iter()
                        .map(|f| combo_route(topo, f, combo))
                        .collect::<Result<Vec<_>, _>>()?;
                    resolve(paths, &mut routes)?;
                }
                space = Some(s);
            }
        }
        let flow_route = (0..flows.len() as u32).collect();

        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let emission: Vec<Emission> = flows
            .iter()
            .map(|f| Emission::for_flow(f, params.packet_bits))
            .collect();
        let end = to_ns(params.duration_s);
        let mut sim = Simulator {
            topo,
            flows,
            end,
            warmup: to_ns(params.warmup_s),
            interval_ns: to_ns(params.interval_s).max(1),
            heap: BinaryHeap::new(),
            seq: 0,
            packets: Vec::new(),
            free: Vec::new(),
            routes,
            flow_route,
            combo_base,
            space,
            tx_ns: topo
                .links()
                .iter()
                .map(|l| ((params.packet_bits as f64 * NS / l.capacity_bps as f64).round() as u64).max(1))
                .collect(),
            state: SimState::idle(topo),
            busy_ns: vec![0; topo.links().len()],
            offered_bits: vec![0; topo.links().len()],
            trace: LoadTrace::for_topology(topo, params.interval_s),
            generated: 0,
            delivered: 0,
            dropped: 0,
            w_generated: 0,
            w_delivered: 0,
            w_dropped: 0,
            w_delay_ns: 0,
            intervals: Vec::new(),
            last_created: vec![0; flows.len()],
            diag: SimDiagnostics {
                link_drops: vec![0; topo.links().len()],
                ..Default::default()
            },
            drop_log: None,
            emission,
            params,
        };
        for (i, em) in sim.emission.clone().iter().enumerate() {
            let offset = rng.gen_range(0..em.gap_ns);
            let first = em.align(offset);
            if first < end {
                sim.schedule(first, Event::Generate(i as u32));
            }
        }
        sim.schedule(0, Event::Tick);
        Ok(sim)
    }

    /// Writes one `t_s link_src link_dst flow_id` line per drop.
    pub fn with_drop_log(mut self, out: &'a mut dyn Write) -> Self {
        self.drop_log = Some(out);
        self
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn load_trace(&self) -> &LoadTrace {
        &self.trace
    }

    pub fn diagnostics(&self) -> &SimDiagnostics {
        &self.diag
    }

    fn schedule(&mut self, t: u64, ev: Event) {
        self.seq += 1;
        self.heap.push(Reverse((t, self.seq, ev)));
    }

    fn in_flight(&self) -> u64 {
        (self.packets.len() - self.free.len()) as u64
    }

    /// Whole-run bit conservation: every generated packet is delivered,
    /// dropped, or still held.
    pub fn check_conservation(&mut self) -> Result<(), SimError> {
        self.diag.conservation_checks += 1;
        let in_flight = self.in_flight();
        if self.generated != self.delivered + self.dropped + in_flight {
            let b = self.params.packet_bits;
            return Err(SimError::Conservation {
                generated: self.generated * b,
                delivered: self.delivered * b,
                dropped: self.dropped * b,
                in_flight: in_flight * b,
            });
        }
        Ok(())
    }

    fn alloc(&mut self, p: Packet) -> u32 {
        match self.free.pop() {
            Some(i) => {
                self.packets[i as usize] = p;
                i
            }
            None => {
                self.packets.push(p);
                (self.packets.len() - 1) as u32
            }
        }
    }

    fn enqueue(&mut self, now: u64, pid: u32) -> Result<(), SimError> {
        let p = self.packets[pid as usize];
        let link = self.routes[p.route as usize][p.hop as usize];
        let li = link.index();
        let bits = self.params.packet_bits;
        self.offered_bits[li] += bits;
        let q = &mut self.state.queues[li];
        q.purge(now);
        if q.departures.len() >= q.capacity as usize {
            q.drops += 1;
            self.diag.link_drops[li] += 1;
            self.dropped += 1;
            if p.counted {
                self.w_dropped += 1;
            }
            self.intervals[p.interval as usize].dropped += 1;
            self.free.push(pid);
            if let Some(out) = self.drop_log.as_mut() {
                let l = self.topo.link(link);
                writeln!(out, "{:.9} {} {} {}", now as f64 / NS, l.src, l.dst, p.flow)?;
            }
            return Ok(());
        }
        let start = now.max(q.busy_until);
        let done = start + self.tx_ns[li];
        q.busy_until = done;
        q.departures.push_back(done);
        let lo = start.max(self.warmup);
        let hi = done.min(self.end);
        if hi > lo {
            self.busy_ns[li] += hi - lo;
        }
        let arrival = done + self.topo.link(link).prop_delay_ns;
        if arrival < self.end {
            self.schedule(arrival, Event::Arrive(pid));
        }
        Ok(())
    }

    fn generate(&mut self, now: u64, flow: u32) -> Result<(), SimError> {
        let f = flow as usize;
        let interval = (now / self.interval_ns) as u32;
        let counted = now >= self.warmup;
        let pid = self.alloc(Packet {
            flow,
            route: self.flow_route[f],
            hop: 0,
            counted,
            interval,
            created: now,
        });
        self.generated += 1;
        if counted {
            self.w_generated += 1;
        }
        self.intervals[interval as usize].generated += 1;
        self.enqueue(now, pid)?;
        let em = self.emission[f];
        let next = em.align(now + em.gap_ns);
        if next < self.end {
            self.schedule(next, Event::Generate(flow));
        }
        Ok(())
    }

    fn arrive(&mut self, now: u64, pid: u32) -> Result<(), SimError> {
        let p = &mut self.packets[pid as usize];
        p.hop += 1;
        let p = *p;
        if p.hop as usize == self.routes[p.route as usize].len() {
            self.delivered += 1;
            if p.counted {
                self.w_delivered += 1;
                self.w_delay_ns += (now - p.created) as u128;
            }
            self.intervals[p.interval as usize].delivered += 1;
            let f = p.flow as usize;
            if p.created < self.last_created[f] {
                self.diag.reordered += 1;
            } else {
                self.last_created[f] = p.created;
            }
            self.free.push(pid);
            Ok(())
        } else {
            self.enqueue(now, pid)
        }
    }

    fn tick(&mut self, now: u64, policy: &mut RoutingPolicy) -> Result<(), SimError> {
        let k = (now / self.interval_ns) as usize;
        if k > 0 {
            let bits: Vec<f64> = self
                .state
                .monitored_egress
                .iter()
                .map(|links| links.iter().map(|l| self.offered_bits[l.index()] as f64).sum())
                .collect();
            self.trace.push_interval(now as f64 / NS, bits);
            self.offered_bits.iter_mut().for_each(|b| *b = 0);
        }
        self.check_conservation()?;
        self.intervals.push(IntervalCount::default());

        let buffers = buffer_snapshot(&self.state);
        for &b in &buffers {
            let (lo, hi) = self.diag.buffer_range.get_or_insert((b, b));
            *lo = lo.min(b);
            *hi = hi.max(b);
        }
        if let RoutingPolicy::DeepLearning(selector) = policy {
            if k > 0 {
                let c = self.intervals[k - 1];
                let b = self.params.packet_bits as f64;
                let outcome = MetricsReport::from_totals(
                    self.params.interval_s,
                    c.generated as f64 * b,
                    c.delivered as f64 * b,
                    c.dropped as f64 * b,
                    (c.generated - c.delivered - c.dropped) as f64 * b,
                    0.0,
                    Vec::new(),
                );
                let min_buffer = buffers.iter().copied().fold(1.0, f64::min);
                selector.finish_interval(&outcome, min_buffer)?;
            }
            let pattern = observe_pattern(&self.trace, now as f64 / NS, self.params.window);
            let input = build_input(&pattern, &buffers).map_err(crate::error::RoutingError::from)?;
            let n = self.space.as_ref().map_or(0, |s| s.len());
            let combo = selector.decide(input, n)?;
            let base = self.combo_base[combo];
            for (f, r) in self.flow_route.iter_mut().enumerate() {
                *r = base + f as u32;
            }
            self.diag.decisions.push(combo);
        }

        let next = now + self.interval_ns;
        if next < self.end {
            self.schedule(next, Event::Tick);
        }
        Ok(())
    }

    /// Processes every event before the horizon and summarizes the
    /// measurement window.
    pub fn run(mut self, policy: &mut RoutingPolicy) -> Result<(MetricsReport, SimDiagnostics), SimError> {
        while let Some(Reverse((t, _, ev))) = self.heap.pop() {
            if t >= self.end {
                break;
            }
            self.state.now_ns = t;
            self.diag.events += 1;
            match ev {
                Event::Generate(f) => self.generate(t, f)?,
                Event::Arrive(p) => self.arrive(t, p)?,
                Event::Tick => self.tick(t, policy)?,
            }
            debug_assert_eq!(self.generated, self.delivered + self.dropped + self.in_flight());
        }
        self.state.now_ns = self.end;
        self.check_conservation()?;

        // the window tally must agree with an independent count of held packets
        let mut freed = vec![false; self.packets.len()];
        for &i in &self.free {
            freed[i as usize] = true;
        }
        let held = self
            .packets
            .iter()
            .zip(&freed)
            .filter(|(p, &f)| !f && p.counted)
            .count() as u64;
        if self.w_generated != self.w_delivered + self.w_dropped + held {
            let b = self.params.packet_bits;
            return Err(SimError::Conservation {
                generated: self.w_generated * b,
                delivered: self.w_delivered * b,
                dropped: self.w_dropped * b,
                in_flight: held * b,
            });
        }

        let b = self.params.packet_bits as f64;
        let window_ns = self.end - self.warmup;
        let duration = window_ns as f64 / NS;
        let mean_delay = if self.w_delivered > 0 {
            (self.w_delay_ns as f64 / self.w_delivered as f64) / NS
        } else {
            0.0
        };
        let util = self
            .busy_ns
            .iter()
            .map(|&busy| (busy as f64 / window_ns as f64).clamp(0.0, 1.0))
            .collect();
        let report = MetricsReport::from_totals(
            duration,
            self.w_generated as f64 * b,
            self.w_delivered as f64 * b,
            self.w_dropped as f64 * b,
            held as f64 * b,
            mean_delay,
            util,
        );
        let _ = self.flows;
        Ok((report, self.diag))
    }
}

pub fn run_packet_sim(
    topo: &Topology,
    flows: &[Flow],
    policy: &mut RoutingPolicy,
    params: &RunParams,
) -> Result<MetricsReport, SimError> {
    let sim = Simulator::new(topo, flows, policy, params.clone())?;
    Ok(sim.run(policy)?.0)
}
