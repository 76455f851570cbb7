//! The layered GEO/MEO/LEO/UAV/ground reference graph.
//!
//! Node indices are dense and grouped by layer, GEOs first and ground nodes
//! last. Within each layer the first half of the nodes belongs to the left
//! partition and the second half to the right partition, so with the default
//! counts `G1 = 0`, `G2 = 1`, `M1..M6 = 2..7`.
//!
//! Every undirected link is stored as two directed links with independent
//! queues; directed link `2k` and `2k + 1` are reverses of each other.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::TopologyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkId(pub u32);

impl LinkId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn reverse(self) -> LinkId {
        LinkId(self.0 ^ 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Geo,
    Meo,
    Leo,
    Uav,
    Ground,
}

impl NodeKind {
    pub const ALL: [NodeKind; 5] = [
        NodeKind::Geo,
        NodeKind::Meo,
        NodeKind::Leo,
        NodeKind::Uav,
        NodeKind::Ground,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NodeKind::Geo => "geo",
            NodeKind::Meo => "meo",
            NodeKind::Leo => "leo",
            NodeKind::Uav => "uav",
            NodeKind::Ground => "ground",
        }
    }

    fn label_prefix(self) -> &'static str {
        match self {
            NodeKind::Geo => "G",
            NodeKind::Meo => "M",
            NodeKind::Leo => "L",
            NodeKind::Uav => "U",
            NodeKind::Ground => "N",
        }
    }

    pub fn is_satellite(self) -> bool {
        matches!(self, NodeKind::Geo | NodeKind::Meo | NodeKind::Leo)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Partition {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Band {
    Ka,
    L,
    Access,
}

impl Band {
    pub fn name(self) -> &'static str {
        match self {
            Band::Ka => "Ka",
            Band::L => "L",
            Band::Access => "Access",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Node {
    pub kind: NodeKind,
    pub side: Partition,
}

/// One direction of a physical link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub src: NodeId,
    pub dst: NodeId,
    pub capacity_bps: u64,
    pub prop_delay_ns: u64,
    pub buffer_pkts: u32,
    pub band: Band,
}

impl Link {
    pub fn prop_delay_s(&self) -> f64 {
        self.prop_delay_ns as f64 / 1e9
    }
}

/// Undirected link description used to assemble a [`Topology`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkSpec {
    pub a: NodeId,
    pub b: NodeId,
    pub capacity_bps: u64,
    pub prop_delay_ns: u64,
    pub buffer_pkts: u32,
    pub band: Band,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Path {
    pub nodes: Vec<NodeId>,
}

impl Path {
    pub fn new(nodes: Vec<NodeId>) -> Self {
        Path { nodes }
    }

    pub fn hops(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    pub fn first(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn last(&self) -> NodeId {
        *self.nodes.last().expect("empty path")
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.nodes.contains(&node)
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, n) in self.nodes.iter().enumerate() {
            if i > 0 {
                f.write_str("->")?;
            }
            write!(f, "{n}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightRule {
    #[default]
    PropDelay,
    HopCount,
}

impl WeightRule {
    pub fn weight(self, link: &Link) -> u64 {
        match self {
            WeightRule::PropDelay => link.prop_delay_ns,
            WeightRule::HopCount => 1,
        }
    }
}

/// Set of layers used to filter cross-partition links.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerFilter(u8);

impl LayerFilter {
    pub fn new(kinds: &[NodeKind]) -> Self {
        LayerFilter(kinds.iter().fold(0, |m, k| m | (1 << *k as u8)))
    }

    pub fn all() -> Self {
        Self::new(&NodeKind::ALL)
    }

    pub fn contains(self, kind: NodeKind) -> bool {
        self.0 & (1 << kind as u8) != 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapacityConfig {
    pub ground_uav_bps: u64,
    pub uav_leo_bps: u64,
    pub leo_meo_bps: u64,
    /// MEO-MEO, MEO-GEO and GEO-GEO links.
    pub isl_bps: u64,
}

impl Default for CapacityConfig {
    fn default() -> Self {
        CapacityConfig {
            ground_uav_bps: 10_000_000,
            uav_leo_bps: 120_000_000,
            leo_meo_bps: 1_000_000_000,
            isl_bps: 1_000_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DelayConfig {
    pub ground_uav_s: f64,
    pub uav_leo_s: f64,
    pub leo_meo_s: f64,
    pub meo_meo_s: f64,
    pub meo_cross_s: f64,
    pub meo_geo_s: f64,
    pub geo_geo_s: f64,
}

impl Default for DelayConfig {
    fn default() -> Self {
        DelayConfig {
            ground_uav_s: 0.0001,
            uav_leo_s: 0.003,
            leo_meo_s: 0.035,
            meo_meo_s: 0.030,
            meo_cross_s: 0.050,
            meo_geo_s: 0.090,
            geo_geo_s: 0.120,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BufferConfig {
    /// Per-direction queue size on LEO/MEO/GEO links.
    pub satellite_pkts: u32,
    /// Per-direction queue size on ground-UAV and UAV-LEO links.
    pub access_pkts: u32,
}

impl Default for BufferConfig {
    fn default() -> Self {
        BufferConfig {
            satellite_pkts: 256,
            access_pkts: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyConfig {
    pub geo: usize,
    pub meo: usize,
    pub leo: usize,
    pub uav: usize,
    pub ground: usize,
    /// MEO cross-partition links as 1-based (left, right) indices within each side.
    pub meo_cross_links: Vec<[usize; 2]>,
    pub geo_cross_links: bool,
    pub capacity: CapacityConfig,
    pub delay: DelayConfig,
    pub buffer: BufferConfig,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        TopologyConfig {
            geo: 2,
            meo: 6,
            leo: 12,
            uav: 120,
            ground: 3200,
            meo_cross_links: vec![[2, 1], [3, 3]],
            geo_cross_links: true,
            capacity: CapacityConfig::default(),
            delay: DelayConfig::default(),
            buffer: BufferConfig::default(),
        }
    }
}

fn secs_to_ns(s: f64) -> u64 {
    (s * 1e9).round() as u64
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: Vec<Node>,
    links: Vec<Link>,
    /// Outgoing (neighbor, link) pairs sorted by neighbor.
    adjacency: Vec<Vec<(NodeId, LinkId)>>,
    /// Upward attachment: ground -> UAV -> LEO -> MEO.
    parent: Vec<Option<NodeId>>,
}

impl Topology {
    /// Assembles a topology from explicit nodes and undirected links,
    /// checking per-link invariants but not connectivity.
    pub fn new(nodes: Vec<Node>, links: Vec<LinkSpec>) -> Result<Self, TopologyError> {
        let n = nodes.len();
        let mut directed = Vec::with_capacity(links.len() * 2);
        let mut adjacency = vec![Vec::new(); n];
        for spec in &links {
            let (a, b) = (spec.a.index(), spec.b.index());
            let bad = |reason| TopologyError::InvalidLink { src: a, dst: b, reason };
            if a >= n || b >= n {
                return Err(bad("endpoint out of range"));
            }
            if a == b {
                return Err(bad("endpoints must differ"));
            }
            if spec.capacity_bps == 0 {
                return Err(bad("capacity must be positive"));
            }
            if spec.prop_delay_ns == 0 {
                return Err(bad("propagation delay must be positive"));
            }
            if spec.buffer_pkts == 0 {
                return Err(bad("buffer must hold at least one packet"));
            }
            if adjacency[a].iter().any(|&(v, _)| v == spec.b) {
                return Err(bad("duplicate link"));
            }
            for (src, dst) in [(spec.a, spec.b), (spec.b, spec.a)] {
                let id = LinkId(directed.len() as u32);
                directed.push(Link {
                    src,
                    dst,
                    capacity_bps: spec.capacity_bps,
                    prop_delay_ns: spec.prop_delay_ns,
                    buffer_pkts: spec.buffer_pkts,
                    band: spec.band,
                });
                adjacency[src.index()].push((dst, id));
            }
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }

        // Attachment follows the unique link to the next layer up.
        let up = |kind: NodeKind| match kind {
            NodeKind::Ground => Some(NodeKind::Uav),
            NodeKind::Uav => Some(NodeKind::Leo),
            NodeKind::Leo => Some(NodeKind::Meo),
            _ => None,
        };
        let parent = (0..n)
            .map(|i| {
                let target = up(nodes[i].kind)?;
                adjacency[i]
                    .iter()
                    .map(|&(v, _)| v)
                    .find(|v| nodes[v.index()].kind == target)
            })
            .collect();

        Ok(Topology {
            nodes,
            links: directed,
            adjacency,
            parent,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, id: NodeId) -> Node {
        self.nodes[id.index()]
    }

    pub fn kind(&self, id: NodeId) -> NodeKind {
        self.nodes[id.index()].kind
    }

    pub fn side(&self, id: NodeId) -> Partition {
        self.nodes[id.index()].side
    }

    pub fn contains(&self, id: NodeId) -> bool {
        id.index() < self.nodes.len()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.index()]
    }

    pub fn neighbors(&self, id: NodeId) -> &[(NodeId, LinkId)] {
        &self.adjacency[id.index()]
    }

    pub fn link_between(&self, a: NodeId, b: NodeId) -> Option<LinkId> {
        let adj = self.adjacency.get(a.index())?;
        adj.binary_search_by_key(&b, |&(v, _)| v).ok().map(|i| adj[i].1)
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.parent[id.index()]
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    pub fn nodes_of(&self, kind: NodeKind) -> impl Iterator<Item = NodeId> + '_ {
        self.node_ids().filter(move |&id| self.kind(id) == kind)
    }

    pub fn nodes_on(&self, kind: NodeKind, side: Partition) -> Vec<NodeId> {
        self.nodes_of(kind).filter(|&id| self.side(id) == side).collect()
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        self.nodes_of(kind).count()
    }

    /// 1-based MEO lookup, matching the `M1..M6` labels.
    pub fn meo(&self, i: usize) -> NodeId {
        self.nth_of(NodeKind::Meo, i)
    }

    /// 1-based GEO lookup, matching the `G1, G2` labels.
    pub fn geo(&self, i: usize) -> NodeId {
        self.nth_of(NodeKind::Geo, i)
    }

    fn nth_of(&self, kind: NodeKind, i: usize) -> NodeId {
        assert!(i >= 1, "labels are 1-based");
        self.nodes_of(kind)
            .nth(i - 1)
            .unwrap_or_else(|| panic!("no {} number {i}", kind.name()))
    }

    /// Monitored satellites in feature-row order: all MEOs, then all GEOs.
    pub fn monitored(&self) -> Vec<NodeId> {
        self.nodes_of(NodeKind::Meo)
            .chain(self.nodes_of(NodeKind::Geo))
            .collect()
    }

    pub fn label(&self, id: NodeId) -> String {
        let kind = self.kind(id);
        let ordinal = self.nodes_of(kind).position(|v| v == id).unwrap_or(0) + 1;
        format!("{}{}", kind.label_prefix(), ordinal)
    }

    /// The MEO a ground/UAV/LEO node ultimately hangs under.
    pub fn attached_meo(&self, id: NodeId) -> Option<NodeId> {
        let mut cur = id;
        loop {
            if self.kind(cur) == NodeKind::Meo {
                return Some(cur);
            }
            cur = self.parent(cur)?;
        }
    }

    /// Access chain from a node up to its MEO, e.g. `[ground, uav, leo, meo]`.
    pub fn uplink_chain(&self, id: NodeId) -> Option<Vec<NodeId>> {
        let mut chain = vec![id];
        let mut cur = id;
        while self.kind(cur) != NodeKind::Meo {
            cur = self.parent(cur)?;
            chain.push(cur);
        }
        Some(chain)
    }

    pub fn is_connected(&self) -> Result<(), TopologyError> {
        if self.nodes.is_empty() {
            return Ok(());
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([NodeId(0)]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in self.neighbors(u) {
                if !seen[v.index()] {
                    seen[v.index()] = true;
                    queue.push_back(v);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(i) => Err(TopologyError::Disconnected(NodeId(i as u32))),
            None => Ok(()),
        }
    }

    /// Plain-text edge list, one directed link per line sorted by `(src, dst)`.
    pub fn dump(&self) -> String {
        let mut order: Vec<&Link> = self.links.iter().collect();
        order.sort_by_key(|l| (l.src, l.dst));
        let mut out = String::with_capacity(order.len() * 48);
        for l in order {
            writeln!(
                out,
                "{} {} {} {} {} {} {} {}",
                l.src,
                l.dst,
                self.kind(l.src).name(),
                self.kind(l.dst).name(),
                l.capacity_bps,
                l.prop_delay_s(),
                l.buffer_pkts,
                l.band.name()
            )
            .expect("write to String");
        }
        out
    }
}

pub fn build_reference_topology(cfg: &TopologyConfig) -> Result<Topology, TopologyError> {
    let invalid = |msg: String| Err(TopologyError::InvalidConfig(msg));
    for (name, count, may_be_zero) in [
        ("geo", cfg.geo, false),
        ("meo", cfg.meo, false),
        ("leo", cfg.leo, false),
        ("uav", cfg.uav, false),
        ("ground", cfg.ground, true),
    ] {
        if count == 0 && !may_be_zero {
            return invalid(format!("{name} count must be positive"));
        }
        if count % 2 != 0 {
            return invalid(format!("{name} count {count} must be divisible by 2"));
        }
    }
    let (geo_s, meo_s, leo_s, uav_s, ground_s) = (cfg.geo / 2, cfg.meo / 2, cfg.leo / 2, cfg.uav / 2, cfg.ground / 2);
    if leo_s % meo_s != 0 {
        return invalid(format!(
            "leo per side ({leo_s}) must be a multiple of meo per side ({meo_s})"
        ));
    }
    if uav_s % leo_s != 0 {
        return invalid(format!(
            "uav per side ({uav_s}) must be a multiple of leo per side ({leo_s})"
        ));
    }
    for &[l, r] in &cfg.meo_cross_links {
        if l == 0 || r == 0 || l > meo_s || r > meo_s {
            return invalid(format!("meo cross link [{l}, {r}] outside 1..={meo_s}"));
        }
    }
    let c = &cfg.capacity;
    if [c.ground_uav_bps, c.uav_leo_bps, c.leo_meo_bps, c.isl_bps].contains(&0) {
        return invalid("capacities must be positive".into());
    }
    let d = &cfg.delay;
    for (name, v) in [
        ("ground_uav_s", d.ground_uav_s),
        ("uav_leo_s", d.uav_leo_s),
        ("leo_meo_s", d.leo_meo_s),
        ("meo_meo_s", d.meo_meo_s),
        ("meo_cross_s", d.meo_cross_s),
        ("meo_geo_s", d.meo_geo_s),
        ("geo_geo_s", d.geo_geo_s),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return invalid(format!("delay {name} must be positive"));
        }
    }
    if cfg.buffer.satellite_pkts == 0 || cfg.buffer.access_pkts == 0 {
        return invalid("buffers must hold at least one packet".into());
    }

    let mut nodes = Vec::with_capacity(cfg.geo + cfg.meo + cfg.leo + cfg.uav + cfg.ground);
    // first[kind] = index of the first node of that kind
    let mut first = [0usize; 5];
    for (k, (kind, per_side)) in [
        (NodeKind::Geo, geo_s),
        (NodeKind::Meo, meo_s),
        (NodeKind::Leo, leo_s),
        (NodeKind::Uav, uav_s),
        (NodeKind::Ground, ground_s),
    ]
    .into_iter()
    .enumerate()
    {
        first[k] = nodes.len();
        for side in [Partition::Left, Partition::Right] {
            nodes.extend(std::iter::repeat_n(Node { kind, side }, per_side));
        }
    }
    let id = |k: usize, side: Partition, i: usize, per_side: usize| {
        let off = if side == Partition::Left { 0 } else { per_side };
        NodeId((first[k] + off + i) as u32)
    };
    let geo = |s, i| id(0, s, i, geo_s);
    let meo = |s, i| id(1, s, i, meo_s);
    let leo = |s, i| id(2, s, i, leo_s);
    let uav = |s, i| id(3, s, i, uav_s);
    let ground = |s, i| id(4, s, i, ground_s);

    let sat = cfg.buffer.satellite_pkts;
    let access = cfg.buffer.access_pkts;
    let mut links = Vec::new();
    let mut push = |a, b, cap, delay_s: f64, buf, band| {
        links.push(LinkSpec {
            a,
            b,
            capacity_bps: cap,
            prop_delay_ns: secs_to_ns(delay_s),
            buffer_pkts: buf,
            band,
        })
    };

    if cfg.geo_cross_links {
        for g in 0..geo_s {
            push(
                geo(Partition::Left, g),
                geo(Partition::Right, g),
                c.isl_bps,
                d.geo_geo_s,
                sat,
                Band::Ka,
            );
        }
    }
    for side in [Partition::Left, Partition::Right] {
        for g in 0..geo_s {
            for h in g + 1..geo_s {
                push(geo(side, g), geo(side, h), c.isl_bps, d.geo_geo_s, sat, Band::Ka);
            }
            for m in 0..meo_s {
                push(geo(side, g), meo(side, m), c.isl_bps, d.meo_geo_s, sat, Band::Ka);
            }
        }
        for m in 0..meo_s {
            for n in m + 1..meo_s {
                push(meo(side, m), meo(side, n), c.isl_bps, d.meo_meo_s, sat, Band::Ka);
            }
        }
    }
    for &[l, r] in &cfg.meo_cross_links {
        push(
            meo(Partition::Left, l - 1),
            meo(Partition::Right, r - 1),
            c.isl_bps,
            d.meo_cross_s,
            sat,
            Band::Ka,
        );
    }
    let leo_per_meo = leo_s / meo_s;
    let uav_per_leo = uav_s / leo_s;
    for side in [Partition::Left, Partition::Right] {
        for l in 0..leo_s {
            push(
                leo(side, l),
                meo(side, l / leo_per_meo),
                c.leo_meo_bps,
                d.leo_meo_s,
                sat,
                Band::Ka,
            );
        }
        for u in 0..uav_s {
            push(
                uav(side, u),
                leo(side, u / uav_per_leo),
                c.uav_leo_bps,
                d.uav_leo_s,
                access,
                Band::L,
            );
        }
        for g in 0..ground_s {
            push(
                ground(side, g),
                uav(side, g % uav_s),
                c.ground_uav_bps,
                d.ground_uav_s,
                access,
                Band::Access,
            );
        }
    }

    let topo = Topology::new(nodes, links)?;
    topo.is_connected()?;
    Ok(topo)
}

/// Minimum-weight simple path; ties go to the lexicographically smallest
/// node-index sequence.
pub fn shortest_path(topo: &Topology, src: NodeId, dst: NodeId, weight: WeightRule) -> Result<Path, TopologyError> {
    for n in [src, dst] {
        if !topo.contains(n) {
            return Err(TopologyError::UnknownNode(n));
        }
    }
    if src == dst {
        return Err(TopologyError::SameEndpoints(src));
    }

    // Distances *to* dst, settled until src pops.
    let mut dist = vec![u64::MAX; topo.node_count()];
    let mut done = vec![false; topo.node_count()];
    let mut heap = BinaryHeap::new();
    dist[dst.index()] = 0;
    heap.push(Reverse((0u64, dst)));
    while let Some(Reverse((d, v))) = heap.pop() {
        if done[v.index()] {
            continue;
        }
        done[v.index()] = true;
        if v == src {
            break;
        }
        for &(u, l) in topo.neighbors(v) {
            // the link u -> v is the reverse of v -> u
            let w = weight.weight(topo.link(l.reverse()));
            let nd = d + w;
            if nd < dist[u.index()] {
                dist[u.index()] = nd;
                heap.push(Reverse((nd, u)));
            }
        }
    }
    if dist[src.index()] == u64::MAX {
        return Err(TopologyError::NoPath { src, dst });
    }

    let mut nodes = vec![src];
    let mut cur = src;
    while cur != dst {
        let next = topo
            .neighbors(cur)
            .iter()
            .find(|&&(v, l)| {
                done[v.index()]
                    && dist[v.index()] != u64::MAX
                    && dist[v.index()] + weight.weight(topo.link(l)) == dist[cur.index()]
            })
            .map(|&(v, _)| v)
            .expect("settled distance implies a predecessor on the shortest-path DAG");
        nodes.push(next);
        cur = next;
    }
    Ok(Path { nodes })
}

pub fn path_weight(topo: &Topology, path: &Path, weight: WeightRule) -> Option<u64> {
    path.nodes
        .windows(2)
        .map(|w| topo.link_between(w[0], w[1]).map(|l| weight.weight(topo.link(l))))
        .sum()
}

/// Total capacity of left-to-right links whose endpoints are both in `filter`.
pub fn cross_section_capacity(topo: &Topology, filter: LayerFilter) -> u64 {
    topo.links()
        .iter()
        .filter(|l| topo.side(l.src) == Partition::Left && topo.side(l.dst) == Partition::Right)
        .filter(|l| filter.contains(topo.kind(l.src)) && filter.contains(topo.kind(l.dst)))
        .map(|l| l.capacity_bps)
        .sum()
}
