//! Gradient descent, interval labels, oracle pretraining and the online loop.

use std::borrow::Borrow;
use std::collections::VecDeque;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cnn::CnnModel;
use super::tensor::Tensor;
use crate::error::NeuralError;
use crate::netsim::MetricsReport;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    /// `(1, 0)`: the combination should be chosen.
    Choose,
    /// `(0, 1)`
    Reject,
}

impl Label {
    pub fn target<S: Scalar>(self) -> [S; 2] {
        match self {
            Label::Choose => [S::one(), S::zero()],
            Label::Reject => [S::zero(), S::one()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample<S> {
    pub input: Tensor<S>,
    pub label: Label,
    pub combo_id: usize,
}

/// One plain gradient-descent step on the mean cross-entropy of `batch`.
/// Returns the loss before the update.
pub fn train_step<S: Scalar, B: Borrow<TrainSample<S>>>(
    model: &mut CnnModel<S>,
    batch: &[B],
    lr: S,
) -> Result<S, NeuralError> {
    if batch.is_empty() {
        return Err(NeuralError::EmptyBatch);
    }
    if !(lr >= S::zero() && lr.is_finite()) {
        return Err(NeuralError::InvalidParam(format!("learning rate {lr}")));
    }
    let mut grad = CnnModel::zeros(model.arch())?;
    let mut total = S::zero();
    for sample in batch {
        let sample = sample.borrow();
        total += model.loss_and_grad(&sample.input, &sample.label.target::<S>(), &mut grad)?;
    }
    let n = S::from_usize(batch.len()).expect("batch size fits");
    let loss = total / n;
    if !loss.is_finite() {
        return Err(NeuralError::NonFinite {
            what: "loss",
            loss: loss.as_f64(),
        });
    }
    let grads = grad.params();
    if grads.iter().flat_map(|g| g.iter()).any(|g| !g.is_finite()) {
        return Err(NeuralError::NonFinite {
            what: "gradient",
            loss: loss.as_f64(),
        });
    }
    if lr > S::zero() {
        let scale = lr / n;
        for (p, g) in model.params_mut().into_iter().zip(grads) {
            for (pv, &gv) in p.iter_mut().zip(g) {
                *pv -= scale * gv;
            }
        }
        if model.params().iter().flat_map(|p| p.iter()).any(|v| !v.is_finite()) {
            return Err(NeuralError::NonFinite {
                what: "parameters",
                loss: loss.as_f64(),
            });
        }
    }
    Ok(loss)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelThresholds {
    /// Interval loss rate must stay below this.
    pub loss: f64,
    /// Minimum remaining-buffer fraction must stay above this.
    pub buffer: f64,
}

impl Default for LabelThresholds {
    fn default() -> Self {
        LabelThresholds {
            loss: 0.001,
            buffer: 0.1,
        }
    }
}

pub fn label_from_outcome(report: &MetricsReport, min_buffer: f64, th: &LabelThresholds) -> Label {
    if report.loss_rate < th.loss && min_buffer > th.buffer {
        Label::Choose
    } else {
        Label::Reject
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer<S> {
    capacity: usize,
    items: VecDeque<TrainSample<S>>,
}

impl<S: Scalar> ReplayBuffer<S> {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1024)),
        }
    }

    pub fn push(&mut self, sample: TrainSample<S>) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(sample);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TrainSample<S>> {
        self.items.iter()
    }

    /// Up to `k` distinct samples drawn uniformly.
    pub fn sample<R: Rng>(&self, rng: &mut R, k: usize) -> Vec<&TrainSample<S>> {
        let k = k.min(self.items.len());
        index::sample(rng, self.items.len(), k)
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OnlineConfig {
    pub enabled: bool,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        OnlineConfig {
            enabled: true,
            replay_capacity: 512,
            batch_size: 32,
            learning_rate: 0.01,
        }
    }
}

/// Per-combination models and replay buffers owned by one simulation run.
#[derive(Debug, Clone)]
pub struct OnlineTrainer<S> {
    pub models: Vec<CnnModel<S>>,
    buffers: Vec<ReplayBuffer<S>>,
    rng: ChaCha8Rng,
    cfg: OnlineConfig,
    thresholds: LabelThresholds,
    steps: usize,
}

impl<S: Scalar> OnlineTrainer<S> {
    pub fn new(models: Vec<CnnModel<S>>, cfg: OnlineConfig, thresholds: LabelThresholds, seed: u64) -> Self {
        let buffers = (0..models.len())
            .map(|_| ReplayBuffer::new(cfg.replay_capacity))
            .collect();
        OnlineTrainer {
            models,
            buffers,
            rng: ChaCha8Rng::seed_from_u64(seed),
            cfg,
            thresholds,
            steps: 0,
        }
    }

    pub fn buffer(&self, combo: usize) -> &ReplayBuffer<S> {
        &self.buffers[combo]
    }

    pub fn config(&self) -> &OnlineConfig {
        &self.cfg
    }

    pub fn thresholds(&self) -> &LabelThresholds {
        &self.thresholds
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn into_models(self) -> Vec<CnnModel<S>> {
        self.models
    }
}

/// Records the outcome of an interval run under `combo` and takes one
/// training step for that combination's model. Returns the step loss, or
/// `None` when training is disabled.
pub fn online_update<S: Scalar>(
    trainer: &mut OnlineTrainer<S>,
    combo: usize,
    input: Tensor<S>,
    outcome: &MetricsReport,
    min_buffer: f64,
) -> Result<Option<S>, NeuralError> {
    if !trainer.cfg.enabled {
        return Ok(None);
    }
    let label = label_from_outcome(outcome, min_buffer, &trainer.thresholds);
    trainer.buffers[combo].push(TrainSample {
        input,
        label,
        combo_id: combo,
    });
    let batch = trainer.buffers[combo].sample(&mut trainer.rng, trainer.cfg.batch_size);
    let lr = S::from_f64_lossy(trainer.cfg.learning_rate);
    let loss = train_step(&mut trainer.models[combo], &batch, lr)?;
    trainer.steps += 1;
    Ok(Some(loss))
}

/// Evaluates every path combination against a demand sample.
pub trait CombinationOracle: Sync {
    type Demand: Sync;

    fn combinations(&self) -> usize;

    fn evaluate(&self, demand: &Self::Demand, combo: usize) -> Result<MetricsReport, NeuralError>;

    /// Model input the router would observe with `demand` routed by
    /// `current` for the last `history` intervals.
    fn features(&self, demand: &Self::Demand, current: usize, history: usize) -> Result<Tensor<f64>, NeuralError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    pub enabled: bool,
    pub samples: usize,
    pub epochs: usize,
    pub margin: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            enabled: true,
            samples: 240,
            epochs: 20,
            margin: 0.01,
            learning_rate: 0.01,
            batch_size: 16,
            seed: 17,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainReport {
    pub samples: usize,
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
    pub skipped: usize,
    /// Mean loss over the final epoch, per model (NaN for models without samples).
    pub final_loss: Vec<f64>,
}

/// Oracle labels for one demand sample: the loss-minimizing combinations are
/// `Choose`, those losing more than `best + margin` are `Reject`, the rest
/// are skipped.
pub fn label_sample<O: CombinationOracle>(
    oracle: &O,
    demand: &O::Demand,
    margin: f64,
) -> Result<Vec<Option<Label>>, NeuralError> {
    let losses = (0..oracle.combinations())
        .map(|c| oracle.evaluate(demand, c).map(|r| r.loss_rate))
        .collect::<Result<Vec<_>, _>>()?;
    let best = losses.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(losses
        .into_iter()
        .map(|l| {
            if l <= best + 1e-12 {
                Some(Label::Choose)
            } else if l > best + margin {
                Some(Label::Reject)
            } else {
                None
            }
        })
        .collect())
}

pub fn pretrain_offline<S: Scalar, O: CombinationOracle>(
    models: &mut [CnnModel<S>],
    demand_samples: &[O::Demand],
    oracle: &O,
    cfg: &PretrainConfig,
) -> Result<PretrainReport, NeuralError> {
    if demand_samples.is_empty() {
        return Err(NeuralError::NoSamples);
    }
    let n_combos = oracle.combinations();
    if models.len() != n_combos {
        return Err(NeuralError::InvalidParam(format!(
            "{} models for {n_combos} combinations",
            models.len()
        )));
    }
    if cfg.batch_size == 0 {
        return Err(NeuralError::InvalidParam("batch_size must be positive".into()));
    }
    let window = models[0].arch().input_w - 1;

    let labelled = demand_samples
        .par_iter()
        .enumerate()
        .map(|(i, demand)| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            let current = rng.gen_range(0..n_combos);
            let history = rng.gen_range(1..=window);
            let input = oracle.features(demand, current, history)?.cast::<S>();
            Ok((input, label_sample(oracle, demand, cfg.margin)?))
        })
        .collect::<Result<Vec<_>, NeuralError>>()?;

    let mut datasets: Vec<Vec<TrainSample<S>>> = vec![Vec::new(); n_combos];
    let mut skipped = 0;
    for (input, labels) in &labelled {
        for (c, label) in labels.iter().enumerate() {
            match label {
                Some(label) => datasets[c].push(TrainSample {
                    input: input.clone(),
                    label: *label,
                    combo_id: c,
                }),
                None => skipped += 1,
            }
        }
    }
    let count = |want: Label| -> Vec<usize> {
        datasets
            .iter()
            .map(|d| d.iter().filter(|s| s.label == want).count())
            .collect()
    };
    let positives = count(Label::Choose);
    let negatives = count(Label::Reject);

    let lr = S::from_f64_lossy(cfg.learning_rate);
    let final_loss = models
        .par_iter_mut()
        .zip(datasets.par_iter())
        .enumerate()
        .map(|(c, (model, data))| {
            if data.is_empty() {
                return Ok(f64::NAN);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
            rng.set_stream(c as u64);
            let mut order: Vec<usize> = (0..data.len()).collect();
            let mut last = f64::NAN;
            for _ in 0..cfg.epochs {
                order.shuffle(&mut rng);
                let mut sum = 0.0;
                let mut batches = 0;
                for chunk in order.chunks(cfg.batch_size) {
                    let batch: Vec<&TrainSample<S>> = chunk.iter().map(|&i| &data[i]).collect();
                    sum += train_step(model, &batch, lr)?.as_f64();
                    batches += 1;
                }
                last = sum / batches as f64;
            }
            Ok(last)
        })
        .collect::<Result<Vec<_>, NeuralError>>()?;

    Ok(PretrainReport {
        samples: demand_samples.len(),
        positives,
        negatives,
        skipped,
        final_loss,
    })
}
