use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::netsim::RunParams;
use crate::neural::{Arch, ConvSpec, LabelThresholds, OnlineConfig, PretrainConfig};
use crate::topology::TopologyConfig;
use crate::traffic::TrafficConfig;

pub const ENV_SEED: &str = "SAGIN_SEED";
pub const ENV_OUT_DIR: &str = "SAGIN_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Policy {
    #[serde(rename = "sp")]
    Sp,
    #[serde(rename = "dnn")]
    Dnn,
}

impl Policy {
    pub fn token(self) -> &'static str {
        match self {
            Policy::Sp => "sp",
            Policy::Dnn => "dnn",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sp" => Ok(Policy::Sp),
            "dnn" => Ok(Policy::Dnn),
            _ => Err(format!("unknown policy {s:?} (expected sp or dnn)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub duration_s: f64,
    pub warmup_s: f64,
    pub packet_bits: u64,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            duration_s: 60.0,
            warmup_s: 5.0,
            packet_bits: 12_000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoutingConfig {
    pub policy: Policy,
    /// Intervals per observed traffic pattern.
    #[serde(rename = "T")]
    pub window: usize,
    pub interval_s: f64,
    /// Exploration probability of the deep-learning router while training online.
    pub epsilon: f64,
    pub thresholds: LabelThresholds,
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for RoutingConfig {
    fn default() -> Self {
        RoutingConfig {
            policy: Policy::Sp,
            window: 16,
            interval_s: 1.0,
            epsilon: 0.1,
            thresholds: LabelThresholds::default(),
            checkpoint_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuralConfig {
    pub conv_channels: Vec<usize>,
    pub kernel: usize,
    /// Hidden fully connected widths; a 2-way softmax layer follows.
    pub hidden: Vec<usize>,
    pub init_seed: u64,
}

impl Default for NeuralConfig {
    fn default() -> Self {
        NeuralConfig {
            conv_channels: vec![8, 16, 16],
            kernel: 3,
            hidden: vec![64, 32],
            init_seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub n_min: usize,
    pub n_max: usize,
    pub n_step: usize,
    pub repetitions: usize,
    pub policies: Vec<Policy>,
    /// Base directory for relative output paths.
    pub out_dir: Option<PathBuf>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            n_min: 100,
            n_max: 1600,
            n_step: 100,
            repetitions: 1,
            policies: vec![Policy::Sp, Policy::Dnn],
            out_dir: None,
        }
    }
}

impl SweepConfig {
    pub fn grid(&self) -> Vec<usize> {
        (self.n_min..=self.n_max).step_by(self.n_step.max(1)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub topology: TopologyConfig,
    pub traffic: TrafficConfig,
    pub simulation: SimulationConfig,
    pub routing: RoutingConfig,
    pub neural: NeuralConfig,
    pub online: OnlineConfig,
    pub pretrain: PretrainConfig,
    pub sweep: SweepConfig,
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            HarnessError::Config(m) => config_err(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Applies `SAGIN_SEED` and `SAGIN_OUT_DIR` from the given lookup.
    pub fn apply_overrides<F: Fn(&str) -> Option<String>>(&mut self, lookup: F) -> Result<(), HarnessError> {
        if let Some(s) = lookup(ENV_SEED) {
            let seed: u64 = s
                .trim()
                .parse()
                .map_err(|_| config_err(format!("{ENV_SEED}={s:?} is not an unsigned integer")))?;
            self.simulation.seed = seed;
        }
        if let Some(dir) = lookup(ENV_OUT_DIR) {
            self.sweep.out_dir = Some(PathBuf::from(dir));
        }
        Ok(())
    }

    pub fn apply_env(&mut self) -> Result<(), HarnessError> {
        self.apply_overrides(|k| std::env::var(k).ok())
    }

    /// Resolves an output path against `sweep.out_dir`.
    pub fn output_path(&self, p: &Path) -> PathBuf {
        match &self.sweep.out_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn run_params(&self, seed: u64) -> RunParams {
        RunParams {
            duration_s: self.simulation.duration_s,
            warmup_s: self.simulation.warmup_s,
            packet_bits: self.simulation.packet_bits,
            interval_s: self.routing.interval_s,
            window: self.routing.window,
            seed,
        }
    }

    /// Model architecture for a topology with `rows` monitored satellites.
    pub fn arch(&self, rows: usize) -> Arch {
        let mut dense = self.neural.hidden.clone();
        dense.push(2);
        Arch {
            input_h: rows,
            input_w: self.routing.window + 1,
            conv: self
                .neural
                .conv_channels
                .iter()
                .map(|&channels| ConvSpec {
                    channels,
                    kernel: self.neural.kernel,
                })
                .collect(),
            dense,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let s = &self.simulation;
        if !(s.duration_s.is_finite() && s.duration_s > 0.0) {
            return Err(config_err(format!(
                "simulation.duration_s = {} must be positive",
                s.duration_s
            )));
        }
        if !(s.warmup_s >= 0.0 && s.warmup_s < s.duration_s) {
            return Err(config_err(format!(
                "simulation.warmup_s = {} must lie in [0, duration_s)",
                s.warmup_s
            )));
        }
        if s.packet_bits == 0 {
            return Err(config_err("simulation.packet_bits must be positive"));
        }
        let r = &self.routing;
        if r.window == 0 {
            return Err(config_err("routing.T must be positive"));
        }
        if !(r.interval_s.is_finite() && r.interval_s > 0.0) {
            return Err(config_err(format!("routing.interval_s = {}", r.interval_s)));
        }
        if !(0.0..=1.0).contains(&r.epsilon) {
            return Err(config_err(format!("routing.epsilon = {} outside [0, 1]", r.epsilon)));
        }
        let w = &self.sweep;
        if w.n_step == 0 || w.n_min == 0 || w.n_min > w.n_max {
            return Err(config_err(format!(
                "sweep range n_min={} n_max={} n_step={} is empty",
                w.n_min, w.n_max, w.n_step
            )));
        }
        if w.repetitions == 0 {
            return Err(config_err("sweep.repetitions must be positive"));
        }
        if w.policies.is_empty() {
            return Err(config_err("sweep.policies is empty"));
        }
        let n = &self.neural;
        if n.kernel == 0 || n.conv_channels.contains(&0) || n.hidden.contains(&0) {
            return Err(config_err("neural layer sizes must be positive"));
        }
        if self.online.batch_size == 0 || self.online.replay_capacity == 0 {
            return Err(config_err("online batch_size and replay_capacity must be positive"));
        }
        if self.pretrain.batch_size == 0 {
            return Err(config_err("pretrain.batch_size must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(
            ExperimentConfig::from_toml_str("").unwrap(),
            ExperimentConfig::default()
        );
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = ExperimentConfig::from_toml_str("[routing]\nwindow = 3\n").unwrap_err();
        assert!(e.is_config());
        assert!(e.to_string().contains("window"), "{e}");
        assert!(ExperimentConfig::from_toml_str("[bogus]\n").is_err());
    }

    #[test]
    fn window_key_is_t() {
        let c = ExperimentConfig::from_toml_str("[routing]\nT = 4\npolicy = \"dnn\"\n").unwrap();
        assert_eq!(c.routing.window, 4);
        assert_eq!(c.routing.policy, Policy::Dnn);
        assert_eq!(c.arch(8).input_w, 5);
    }

    #[test]
    fn overrides() {
        let mut c = ExperimentConfig::default();
        c.apply_overrides(|k| match k {
            ENV_SEED => Some("99".into()),
            ENV_OUT_DIR => Some("/tmp/x".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(c.simulation.seed, 99);
        assert_eq!(c.output_path(Path::new("a.csv")), PathBuf::from("/tmp/x/a.csv"));
        assert_eq!(c.output_path(Path::new("/abs.csv")), PathBuf::from("/abs.csv"));
        assert!(c.apply_overrides(|k| (k == ENV_SEED).then(|| "-1".into())).is_err());
    }

    #[test]
    fn grid() {
        let s = SweepConfig {
            n_min: 100,
            n_max: 1600,
            n_step: 300,
            ..Default::default()
        };
        assert_eq!(s.grid(), vec![100, 400, 700, 1000, 1300, 1600]);
        assert_eq!(SweepConfig::default().grid().len(), 16);
    }

    #[test]
    fn invalid_values() {
        for doc in [
            "[simulation]\nduration_s = 0.0\n",
            "[simulation]\nwarmup_s = 100.0\n",
            "[routing]\nepsilon = 2.0\n",
            "[sweep]\nn_min = 500\nn_max = 100\n",
            "[sweep]\npolicies = []\n",
            "[routing]\npolicy = \"ospf\"\n",
        ] {
            assert!(ExperimentConfig::from_toml_str(doc).unwrap_err().is_config(), "{doc}");
        }
    }
}
