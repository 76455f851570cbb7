//! OD pairs, candidate paths, path combinations and the two routing policies.
//!
//! The satellite segment between a left MEO (origin) and a right MEO
//! (destination) crosses the partition through one *egress class*: one of the
//! MEO cross links or the GEO cross link. A path combination assigns one
//! egress class to every origin MEO, which fixes a path for each of that
//! origin's OD pairs.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::RoutingError;
use crate::netsim::MetricsReport;
use crate::neural::{online_update, CnnModel, LabelThresholds, OnlineConfig, OnlineTrainer, Tensor};
use crate::topology::{shortest_path, NodeId, NodeKind, Partition, Path, Topology, WeightRule};
use crate::traffic::Flow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OdPair {
    pub origin: NodeId,
    pub destination: NodeId,
}

impl fmt::Display for OdPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.origin, self.destination)
    }
}

/// Offered satellite-segment demand per OD pair, in bits/second.
pub type OdDemands = BTreeMap<OdPair, f64>;

/// A cross-partition link used to leave the left side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EgressClass {
    pub left: NodeId,
    pub right: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathCombination {
    pub combo_id: usize,
    pub assignment: BTreeMap<OdPair, Path>,
}

/// Left MEOs x right MEOs, in index order.
pub fn od_pairs(topo: &Topology) -> Vec<OdPair> {
    let left = topo.nodes_on(NodeKind::Meo, Partition::Left);
    let right = topo.nodes_on(NodeKind::Meo, Partition::Right);
    left.iter()
        .flat_map(|&origin| right.iter().map(move |&destination| OdPair { origin, destination }))
        .collect()
}

/// MEO cross links ordered by left endpoint, then GEO cross links.
pub fn egress_classes(topo: &Topology) -> Vec<EgressClass> {
    let mut meo = Vec::new();
    let mut geo = Vec::new();
    for l in topo.links() {
        if topo.side(l.src) != Partition::Left || topo.side(l.dst) != Partition::Right {
            continue;
        }
        let class = EgressClass {
            left: l.src,
            right: l.dst,
        };
        match (topo.kind(l.src), topo.kind(l.dst)) {
            (NodeKind::Meo, NodeKind::Meo) => meo.push(class),
            (NodeKind::Geo, NodeKind::Geo) => geo.push(class),
            _ => {}
        }
    }
    let key = |c: &EgressClass| (c.left, c.right);
    meo.sort_by_key(key);
    geo.sort_by_key(key);
    meo.extend(geo);
    meo
}

fn class_path(topo: &Topology, od: OdPair, class: EgressClass) -> Result<Path, RoutingError> {
    let mut nodes = vec![od.origin];
    if od.origin != class.left {
        nodes.push(class.left);
    }
    nodes.push(class.right);
    if od.destination != class.right {
        nodes.push(od.destination);
    }
    for w in nodes.windows(2) {
        if topo.link_between(w[0], w[1]).is_none() {
            return Err(RoutingError::MissingEgress(w[0], w[1]));
        }
    }
    Ok(Path::new(nodes))
}

/// One candidate per egress class, in class order.
pub fn enumerate_candidate_paths(topo: &Topology, od: OdPair) -> Result<Vec<Path>, RoutingError> {
    egress_classes(topo)
        .into_iter()
        .map(|class| class_path(topo, od, class))
        .collect()
}

/// All per-origin egress assignments and the candidate paths they induce.
#[derive(Debug, Clone)]
pub struct CombinationSpace {
    origins: Vec<NodeId>,
    classes: Vec<EgressClass>,
    od_pairs: Vec<OdPair>,
    combos: Vec<PathCombination>,
}

impl CombinationSpace {
    pub fn new(topo: &Topology) -> Result<Self, RoutingError> {
        let origins = topo.nodes_on(NodeKind::Meo, Partition::Left);
        let classes = egress_classes(topo);
        let pairs = od_pairs(topo);
        let candidates: BTreeMap<OdPair, Vec<Path>> = pairs
            .iter()
            .map(|&od| Ok((od, enumerate_candidate_paths(topo, od)?)))
            .collect::<Result<_, RoutingError>>()?;
        let n_classes = classes.len();
        let total = n_classes.pow(origins.len() as u32);
        let combos = (0..total)
            .map(|combo_id| {
                let assignment = pairs
                    .iter()
                    .map(|od| {
                        let o = origins.iter().position(|&m| m == od.origin).expect("origin");
                        let class = digit(combo_id, o, origins.len(), n_classes);
                        (*od, candidates[od][class].clone())
                    })
                    .collect();
                PathCombination { combo_id, assignment }
            })
            .collect();
        Ok(CombinationSpace {
            origins,
            classes,
            od_pairs: pairs,
            combos,
        })
    }

    pub fn len(&self) -> usize {
        self.combos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.combos.is_empty()
    }

    pub fn combos(&self) -> &[PathCombination] {
        &self.combos
    }

    pub fn combo(&self, id: usize) -> &PathCombination {
        &self.combos[id]
    }

    pub fn od_pairs(&self) -> &[OdPair] {
        &self.od_pairs
    }

    pub fn origins(&self) -> &[NodeId] {
        &self.origins
    }

    pub fn classes(&self) -> &[EgressClass] {
        &self.classes
    }

    /// Egress class chosen for origin number `origin` (0-based) by `combo_id`.
    pub fn choice(&self, combo_id: usize, origin: usize) -> usize {
        digit(combo_id, origin, self.origins.len(), self.classes.len())
    }
}

/// Base-`radix` digit of `id`, most significant first.
fn digit(id: usize, pos: usize, width: usize, radix: usize) -> usize {
    (id / radix.pow((width - 1 - pos) as u32)) % radix
}

pub fn enumerate_combinations(topo: &Topology) -> Result<Vec<PathCombination>, RoutingError> {
    Ok(CombinationSpace::new(topo)?.combos)
}

pub fn od_of_flow(topo: &Topology, flow: &Flow) -> Result<OdPair, RoutingError> {
    let origin = topo.attached_meo(flow.src).ok_or(RoutingError::Unattached(flow.src))?;
    let destination = topo.attached_meo(flow.dst).ok_or(RoutingError::Unattached(flow.dst))?;
    Ok(OdPair { origin, destination })
}

/// Mean offered rate of `flows` aggregated per OD pair.
pub fn od_demands_from_flows(topo: &Topology, flows: &[Flow]) -> Result<OdDemands, RoutingError> {
    let mut out = OdDemands::new();
    for f in flows {
        *out.entry(od_of_flow(topo, f)?).or_insert(0.0) += f.rate_bps;
    }
    Ok(out)
}

/// Joins the source access chain, a MEO-to-MEO segment and the destination access chain.
fn splice(topo: &Topology, flow: &Flow, segment: &Path) -> Result<Path, RoutingError> {
    let up = topo.uplink_chain(flow.src).ok_or(RoutingError::Unattached(flow.src))?;
    let down = topo.uplink_chain(flow.dst).ok_or(RoutingError::Unattached(flow.dst))?;
    let mut nodes = up;
    nodes.pop();
    nodes.extend_from_slice(&segment.nodes);
    nodes.pop();
    nodes.extend(down.into_iter().rev());
    Ok(Path::new(nodes))
}

/// Shortest-path route: the access chains are unique, so only the MEO-to-MEO
/// segment is searched.
pub fn sp_route(topo: &Topology, flow: &Flow) -> Result<Path, RoutingError> {
    let od = od_of_flow(topo, flow)?;
    let segment = if od.origin == od.destination {
        Path::new(vec![od.origin])
    } else {
        shortest_path(topo, od.origin, od.destination, WeightRule::PropDelay)?
    };
    splice(topo, flow, &segment)
}

/// [`sp_route`] for many flows, searching each OD segment once.
pub fn sp_routes(topo: &Topology, flows: &[Flow]) -> Result<Vec<Path>, RoutingError> {
    let mut segments: HashMap<OdPair, Path> = HashMap::new();
    flows
        .iter()
        .map(|f| {
            let od = od_of_flow(topo, f)?;
            let segment = match segments.entry(od) {
                Entry::Occupied(e) => e.into_mut(),
                Entry::Vacant(e) => e.insert(shortest_path(topo, od.origin, od.destination, WeightRule::PropDelay)?),
            };
            splice(topo, f, segment)
        })
        .collect()
}

pub fn combo_route(topo: &Topology, flow: &Flow, combo: &PathCombination) -> Result<Path, RoutingError> {
    let od = od_of_flow(topo, flow)?;
    let segment = combo.assignment.get(&od).ok_or(RoutingError::Unattached(flow.src))?;
    splice(topo, flow, segment)
}

/// Index of the largest value; ties go to the lowest index.
pub fn select_argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExploreParams {
    pub epsilon: f64,
    /// Exploration only happens in training mode.
    pub training: bool,
}

/// Picks the combination whose model is most confident it should be chosen,
/// or (training mode, probability epsilon) a uniformly random one.
pub fn dl_select_combination<R: Rng>(
    features: &Tensor<f64>,
    models: &[CnnModel<f64>],
    n_combinations: usize,
    explore: &ExploreParams,
    rng: &mut R,
) -> Result<usize, RoutingError> {
    if models.len() != n_combinations || n_combinations == 0 {
        return Err(RoutingError::ModelCount {
            expected: n_combinations,
            got: models.len(),
        });
    }
    if explore.training && explore.epsilon > 0.0 && rng.gen::<f64>() < explore.epsilon {
        return Ok(rng.gen_range(0..n_combinations));
    }
    let p_choose = models
        .iter()
        .map(|m| m.forward(features).map(|p| p[0]))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(select_argmax(&p_choose).expect("non-empty"))
}

/// Run-local state of the deep-learning router.
#[derive(Debug, Clone)]
pub struct DlSelector {
    trainer: OnlineTrainer<f64>,
    explore: ExploreParams,
    rng: ChaCha8Rng,
    pending: Option<(Tensor<f64>, usize)>,
    decisions: Vec<usize>,
}

impl DlSelector {
    pub fn new(
        models: Vec<CnnModel<f64>>,
        online: OnlineConfig,
        thresholds: LabelThresholds,
        epsilon: f64,
        seed: u64,
    ) -> Self {
        let training = online.enabled;
        DlSelector {
            trainer: OnlineTrainer::new(models, online, thresholds, seed ^ 0x5bd1_e995),
            explore: ExploreParams { epsilon, training },
            rng: ChaCha8Rng::seed_from_u64(seed),
            pending: None,
            decisions: Vec::new(),
        }
    }

    pub fn models(&self) -> &[CnnModel<f64>] {
        &self.trainer.models
    }

    pub fn into_models(self) -> Vec<CnnModel<f64>> {
        self.trainer.into_models()
    }

    pub fn trainer(&self) -> &OnlineTrainer<f64> {
        &self.trainer
    }

    /// Combination chosen at each decision point so far.
    pub fn decisions(&self) -> &[usize] {
        &self.decisions
    }

    pub fn explore(&self) -> ExploreParams {
        self.explore
    }

    /// Selects the combination for the next interval.
    pub fn decide(&mut self, input: Tensor<f64>, n_combinations: usize) -> Result<usize, RoutingError> {
        let combo = dl_select_combination(
            &input,
            &self.trainer.models,
            n_combinations,
            &self.explore,
            &mut self.rng,
        )?;
        self.pending = Some((input, combo));
        self.decisions.push(combo);
        Ok(combo)
    }

    /// Feeds the outcome of the interval started by the last [`decide`](Self::decide)
    /// to the online trainer.
    pub fn finish_interval(&mut self, outcome: &MetricsReport, min_buffer: f64) -> Result<(), RoutingError> {
        if let Some((input, combo)) = self.pending.take() {
            online_update(&mut self.trainer, combo, input, outcome, min_buffer)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum RoutingPolicy {
    /// Static propagation-delay shortest path per flow.
    ShortestPath,
    /// One path combination for the whole run.
    Fixed(usize),
    /// Per-flow routes supplied by the caller, in flow order.
    Explicit(Vec<Path>),
    /// Combination re-selected every interval by the per-combination CNNs.
    DeepLearning(Box<DlSelector>),
}

impl RoutingPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            RoutingPolicy::ShortestPath => "sp",
            RoutingPolicy::Fixed(_) => "fixed",
            RoutingPolicy::Explicit(_) => "explicit",
            RoutingPolicy::DeepLearning(_) => "dnn",
        }
    }
}
