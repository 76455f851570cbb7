use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, Policy};
use crate::error::HarnessError;
use crate::netsim::{FluidOracle, MetricsReport, SimDiagnostics, Simulator};
use crate::neural::checkpoint;
use crate::neural::{pretrain_offline, CnnModel, PretrainReport};
use crate::routing::{od_demands_from_flows, CombinationSpace, DlSelector, OdDemands, RoutingPolicy};
use crate::topology::{build_reference_topology, NodeKind, Partition, Topology};
use crate::traffic::select_active_sources;

/// One measured sweep point. Values are rounded to their CSV precision on
/// construction, so a written and re-read result compares equal.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub policy: Policy,
    pub n_sources: usize,
    pub seed: u64,
    pub throughput_bps: f64,
    pub loss_rate: f64,
    pub mean_delay_s: f64,
}

fn round6(x: f64) -> f64 {
    format!("{x:.6}").parse().expect("formatted float parses")
}

impl SweepRow {
    pub fn new(
        policy: Policy,
        n_sources: usize,
        seed: u64,
        throughput_bps: f64,
        loss_rate: f64,
        mean_delay_s: f64,
    ) -> Self {
        SweepRow {
            policy,
            n_sources,
            seed,
            throughput_bps: throughput_bps.round(),
            loss_rate: round6(loss_rate),
            mean_delay_s: round6(mean_delay_s),
        }
    }

    fn key(&self) -> (Policy, usize, u64) {
        (self.policy, self.n_sources, self.seed)
    }
}

/// Rows sorted by (policy, n, seed); `sp` orders before `dnn`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn new(mut rows: Vec<SweepRow>) -> Self {
        rows.sort_by_key(SweepRow::key);
        SweepResult { rows }
    }

    pub fn rows(&self) -> &[SweepRow] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn policies(&self) -> Vec<Policy> {
        let mut p: Vec<Policy> = self.rows.iter().map(|r| r.policy).collect();
        p.dedup();
        p
    }

    /// Mean of `metric` over repetitions, per n, for one policy.
    pub fn mean_curve(&self, policy: Policy, metric: impl Fn(&SweepRow) -> f64) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64, usize)> = Vec::new();
        for r in self.rows.iter().filter(|r| r.policy == policy) {
            match out.last_mut() {
                Some((n, sum, k)) if *n == r.n_sources => {
                    *sum += metric(r);
                    *k += 1;
                }
                _ => out.push((r.n_sources, metric(r), 1)),
            }
        }
        out.into_iter().map(|(n, s, k)| (n, s / k as f64)).collect()
    }
}

/// Random OD demand samples for offline training, each the aggregate of a
/// random number of active sources.
pub fn demand_samples(topo: &Topology, cfg: &ExperimentConfig) -> Result<Vec<OdDemands>, HarnessError> {
    let available = topo
        .nodes_on(NodeKind::Ground, Partition::Left)
        .len()
        .min(topo.nodes_on(NodeKind::Ground, Partition::Right).len());
    if available == 0 {
        return Err(HarnessError::Config("topology has no ground sources".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.pretrain.seed);
    (0..cfg.pretrain.samples)
        .map(|_| {
            let n = rng.gen_range(1..=available);
            let flows = select_active_sources(topo, n, rng.gen(), &cfg.traffic)?;
            Ok(od_demands_from_flows(topo, &flows)?)
        })
        .collect()
}

pub fn fresh_models(topo: &Topology, cfg: &ExperimentConfig) -> Result<Vec<CnnModel<f64>>, HarnessError> {
    let arch = cfg.arch(topo.monitored().len());
    let n = CombinationSpace::new(topo)?.len();
    (0..n)
        .map(|c| Ok(CnnModel::new(&arch, cfg.neural.init_seed.wrapping_add(c as u64))?))
        .collect()
}

/// Fresh models trained against the fluid oracle on [`demand_samples`].
pub fn pretrain(topo: &Topology, cfg: &ExperimentConfig) -> Result<(Vec<CnnModel<f64>>, PretrainReport), HarnessError> {
    let mut models = fresh_models(topo, cfg)?;
    let oracle = FluidOracle::new(topo, cfg.routing.window)?;
    let samples = demand_samples(topo, cfg)?;
    let report = pretrain_offline(&mut models, &samples, &oracle, &cfg.pretrain)?;
    Ok((models, report))
}

/// Checkpoints from `routing.checkpoint_dir` if present, else pretraining if
/// enabled.
pub fn prepare_models(topo: &Topology, cfg: &ExperimentConfig) -> Result<Vec<CnnModel<f64>>, HarnessError> {
    let count = CombinationSpace::new(topo)?.len();
    if let Some(dir) = &cfg.routing.checkpoint_dir {
        if dir.join("cnn_000.ckpt").exists() {
            let models = checkpoint::load_models::<f64>(dir, count)?;
            let want = cfg.arch(topo.monitored().len());
            if models.iter().any(|m| m.arch() != &want) {
                return Err(HarnessError::Config(format!(
                    "checkpoints in {} do not match the configured architecture",
                    dir.display()
                )));
            }
            return Ok(models);
        }
    }
    if cfg.pretrain.enabled {
        Ok(pretrain(topo, cfg)?.0)
    } else {
        Err(HarnessError::MissingCheckpoint)
    }
}

pub fn routing_policy(
    policy: Policy,
    cfg: &ExperimentConfig,
    models: Option<&[CnnModel<f64>]>,
    seed: u64,
) -> Result<RoutingPolicy, HarnessError> {
    Ok(match policy {
        Policy::Sp => RoutingPolicy::ShortestPath,
        Policy::Dnn => {
            let models = models.ok_or(HarnessError::MissingCheckpoint)?;
            RoutingPolicy::DeepLearning(Box::new(DlSelector::new(
                models.to_vec(),
                cfg.online.clone(),
                cfg.routing.thresholds,
                cfg.routing.epsilon,
                seed,
            )))
        }
    })
}

/// One packet-level run. Repetition `rep` uses simulation seed `seed + rep`
/// and traffic seed `traffic.seed + rep`.
pub fn run_point(
    topo: &Topology,
    cfg: &ExperimentConfig,
    policy: Policy,
    n_sources: usize,
    rep: u64,
    models: Option<&[CnnModel<f64>]>,
) -> Result<(MetricsReport, SimDiagnostics), HarnessError> {
    let seed = cfg.simulation.seed.wrapping_add(rep);
    let flows = select_active_sources(topo, n_sources, cfg.traffic.seed.wrapping_add(rep), &cfg.traffic)?;
    let mut routing = routing_policy(policy, cfg, models, seed)?;
    let sim = Simulator::new(topo, &flows, &routing, cfg.run_params(seed))?;
    Ok(sim.run(&mut routing)?)
}

pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult, HarnessError> {
    cfg.validate()?;
    let topo = build_reference_topology(&cfg.topology)?;
    run_sweep_on(&topo, cfg, None)
}

/// [`run_sweep`] on a prebuilt topology, optionally with given models.
pub fn run_sweep_on(
    topo: &Topology,
    cfg: &ExperimentConfig,
    models: Option<Vec<CnnModel<f64>>>,
) -> Result<SweepResult, HarnessError> {
    let mut policies = cfg.sweep.policies.clone();
    policies.sort();
    policies.dedup();
    let models = match models {
        Some(m) => Some(m),
        None if policies.contains(&Policy::Dnn) => Some(prepare_models(topo, cfg)?),
        None => None,
    };
    let jobs: Vec<(Policy, usize, u64)> = policies
        .iter()
        .flat_map(|&p| {
            cfg.sweep
                .grid()
                .into_iter()
                .flat_map(move |n| (0..cfg.sweep.repetitions as u64).map(move |r| (p, n, r)))
        })
        .collect();
    let rows = jobs
        .into_par_iter()
        .map(|(policy, n, rep)| {
            let (m, _) = run_point(topo, cfg, policy, n, rep, models.as_deref())?;
            Ok(SweepRow::new(
                policy,
                n,
                cfg.simulation.seed.wrapping_add(rep),
                m.throughput_bps,
                m.loss_rate,
                m.mean_delay_s,
            ))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(SweepResult::new(rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_sort_sp_first() {
        let r = SweepResult::new(vec![
            SweepRow::new(Policy::Dnn, 100, 1, 1.0, 0.0, 0.0),
            SweepRow::new(Policy::Sp, 400, 1, 1.0, 0.0, 0.0),
            SweepRow::new(Policy::Sp, 100, 2, 1.0, 0.0, 0.0),
            SweepRow::new(Policy::Sp, 100, 1, 1.0, 0.0, 0.0),
        ]);
        let keys: Vec<_> = r.rows().iter().map(SweepRow::key).collect();
        assert_eq!(
            keys,
            vec![
                (Policy::Sp, 100, 1),
                (Policy::Sp, 100, 2),
                (Policy::Sp, 400, 1),
                (Policy::Dnn, 100, 1)
            ]
        );
        assert_eq!(r.policies(), vec![Policy::Sp, Policy::Dnn]);
    }

    #[test]
    fn quantized_on_construction() {
        let r = SweepRow::new(Policy::Sp, 1, 1, 1234.6, 0.12345678, 0.0800000001);
        assert_eq!(
            (r.throughput_bps, r.loss_rate, r.mean_delay_s),
            (1235.0, 0.123457, 0.08)
        );
    }

    #[test]
    fn mean_curve_averages_repetitions() {
        let r = SweepResult::new(vec![
            SweepRow::new(Policy::Sp, 100, 1, 2.0, 0.0, 0.0),
            SweepRow::new(Policy::Sp, 100, 2, 4.0, 0.0, 0.0),
            SweepRow::new(Policy::Sp, 200, 1, 5.0, 0.0, 0.0),
        ]);
        assert_eq!(
            r.mean_curve(Policy::Sp, |r| r.throughput_bps),
            vec![(100, 3.0), (200, 5.0)]
        );
    }

    #[test]
    fn dnn_without_models_or_pretraining() {
        let mut cfg = ExperimentConfig::default();
        cfg.pretrain.enabled = false;
        cfg.sweep.policies = vec![Policy::Dnn];
        let topo = build_reference_topology(&cfg.topology).unwrap();
        assert!(matches!(
            prepare_models(&topo, &cfg),
            Err(HarnessError::MissingCheckpoint)
        ));
    }
}
