//! Training configuration and its `key = value` text form.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use super::TrainError;
use crate::maps::MapRef;
use crate::policy::Architecture;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// `followerlite` or `follower`.
    pub arch: String,
    pub learning_rate: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_ratio: f64,
    /// Transitions per gradient step.
    pub batch_size: usize,
    pub epochs: usize,
    pub entropy_coef: f64,
    pub value_loss_coef: f64,
    /// Length of the contiguous sequences the recurrent core is unrolled over.
    pub recurrence_rollout: usize,
    pub rollout_workers: usize,
    pub envs_per_worker: usize,
    pub agents_min: usize,
    pub agents_max: usize,
    /// Agent transitions to collect in total.
    pub total_steps: u64,
    pub seed: u64,
    pub map: MapRef,
    /// Give every training episode a freshly seeded map when `map` is a generator.
    pub vary_map: bool,
    pub episode_length: usize,
    /// Steps each env advances per collection round.
    pub segment_length: usize,
    pub max_grad_norm: f64,
    pub use_static_cost: bool,
    pub use_dynamic_cost: bool,
    /// Run validation every this many updates (0 disables it).
    pub validation_interval: usize,
    pub validation_episodes: usize,
    pub validation_agents: usize,
    /// Write a checkpoint every this many updates (0 writes only the final one).
    pub checkpoint_interval: usize,
    pub out_dir: Option<PathBuf>,
}

impl TrainConfig {
    /// The published FollowerLite hyperparameters.
    pub fn follower_lite() -> Self {
        Self {
            arch: "followerlite".into(),
            learning_rate: 0.000133,
            gamma: 0.971,
            gae_lambda: 0.95,
            clip_ratio: 0.2,
            batch_size: 16384,
            epochs: 1,
            entropy_coef: 0.0157,
            value_loss_coef: 0.5,
            recurrence_rollout: 1,
            rollout_workers: 4,
            envs_per_worker: 4,
            agents_min: 128,
            agents_max: 256,
            total_steps: 20_000_000,
            seed: 0,
            map: MapRef::Maze {
                width: 65,
                height: 65,
                seed: 0,
            },
            vary_map: true,
            episode_length: 512,
            segment_length: 32,
            max_grad_norm: 0.5,
            use_static_cost: true,
            use_dynamic_cost: true,
            validation_interval: 50,
            validation_episodes: 4,
            validation_agents: 128,
            checkpoint_interval: 100,
            out_dir: None,
        }
    }

    /// The published Follower hyperparameters.
    pub fn follower() -> Self {
        Self {
            arch: "follower".into(),
            learning_rate: 0.00022,
            gamma: 0.976,
            entropy_coef: 0.023,
            recurrence_rollout: 8,
            rollout_workers: 8,
            total_steps: 1_000_000_000,
            ..Self::follower_lite()
        }
    }

    /// Small FollowerLite run that finishes in minutes on one CPU core.
    pub fn desk() -> Self {
        Self {
            learning_rate: 0.003,
            batch_size: 128,
            rollout_workers: 1,
            envs_per_worker: 16,
            agents_min: 2,
            agents_max: 2,
            total_steps: 200_000,
            map: MapRef::Random {
                width: 8,
                height: 8,
                density: 0.0,
                seed: 0,
            },
            vary_map: false,
            episode_length: 128,
            segment_length: 32,
            validation_interval: 0,
            validation_episodes: 2,
            validation_agents: 2,
            checkpoint_interval: 0,
            ..Self::follower_lite()
        }
    }

    pub fn defaults_for(arch: &str) -> Option<Self> {
        match arch {
            "followerlite" => Some(Self::follower_lite()),
            "follower" => Some(Self::follower()),
            _ => None,
        }
    }

    pub fn architecture(&self) -> Result<Architecture, TrainError> {
        Architecture::by_name(&self.arch).ok_or_else(|| TrainError::Config(format!("unknown arch `{}`", self.arch)))
    }

    /// Sequence length used when replaying the buffer: the recurrence rollout
    /// for recurrent networks, single steps otherwise.
    pub fn chunk_len(&self) -> Result<usize, TrainError> {
        Ok(if self.architecture()?.is_recurrent() {
            self.recurrence_rollout
        } else {
            1
        })
    }

    pub fn num_envs(&self) -> usize {
        self.rollout_workers * self.envs_per_worker
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |m: &str| Err(TrainError::Config(m.to_string()));
        let chunk = self.chunk_len()?;
        if self.num_envs() == 0 {
            return fail("rollout_workers and envs_per_worker must be positive");
        }
        if self.agents_min == 0 || self.agents_min > self.agents_max {
            return fail("need 0 < agents_min <= agents_max");
        }
        if self.segment_length == 0 || self.episode_length == 0 || self.batch_size == 0 || self.epochs == 0 {
            return fail("segment_length, episode_length, batch_size and epochs must be positive");
        }
        if chunk == 0 || !self.segment_length.is_multiple_of(chunk) {
            return fail("segment_length must be a positive multiple of recurrence_rollout");
        }
        let in_unit = |x: f64| (0.0..=1.0).contains(&x);
        if !in_unit(self.gamma) || !in_unit(self.gae_lambda) {
            return fail("gamma and gae_lambda must lie in [0, 1]");
        }
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.learning_rate) || !positive(self.clip_ratio) || !positive(self.max_grad_norm) {
            return fail("learning_rate, clip_ratio and max_grad_norm must be positive");
        }
        if self.validation_interval > 0 && (self.validation_episodes == 0 || self.validation_agents == 0) {
            return fail("validation needs validation_episodes and validation_agents");
        }
        Ok(())
    }

    /// Every key, one `key = value` per line; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("arch", self.arch.clone()),
            ("learning_rate", self.learning_rate.to_string()),
            ("gamma", self.gamma.to_string()),
            ("gae_lambda", self.gae_lambda.to_string()),
            ("clip_ratio", self.clip_ratio.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("epochs", self.epochs.to_string()),
            ("entropy_coef", self.entropy_coef.to_string()),
            ("value_loss_coef", self.value_loss_coef.to_string()),
            ("recurrence_rollout", self.recurrence_rollout.to_string()),
            ("rollout_workers", self.rollout_workers.to_string()),
            ("envs_per_worker", self.envs_per_worker.to_string()),
            ("agents_min", self.agents_min.to_string()),
            ("agents_max", self.agents_max.to_string()),
            ("total_steps", self.total_steps.to_string()),
            ("seed", self.seed.to_string()),
            ("map", self.map.to_string()),
            ("vary_map", self.vary_map.to_string()),
            ("episode_length", self.episode_length.to_string()),
            ("segment_length", self.segment_length.to_string()),
            ("max_grad_norm", self.max_grad_norm.to_string()),
            ("use_static_cost", self.use_static_cost.to_string()),
            ("use_dynamic_cost", self.use_dynamic_cost.to_string()),
            ("validation_interval", self.validation_interval.to_string()),
            ("validation_episodes", self.validation_episodes.to_string()),
            ("validation_agents", self.validation_agents.to_string()),
            ("checkpoint_interval", self.checkpoint_interval.to_string()),
            (
                "out_dir",
                self.out_dir
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_default(),
            ),
        ]
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn p<T: FromStr>(v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("cannot parse `{v}`"))
        }
        match key {
            "arch" => self.arch = value.to_string(),
            "learning_rate" => self.learning_rate = p(value)?,
            "gamma" => self.gamma = p(value)?,
            "gae_lambda" => self.gae_lambda = p(value)?,
            "clip_ratio" => self.clip_ratio = p(value)?,
            "batch_size" => self.batch_size = p(value)?,
            "epochs" => self.epochs = p(value)?,
            "entropy_coef" => self.entropy_coef = p(value)?,
            "value_loss_coef" => self.value_loss_coef = p(value)?,
            "recurrence_rollout" => self.recurrence_rollout = p(value)?,
            "rollout_workers" => self.rollout_workers = p(value)?,
            "envs_per_worker" => self.envs_per_worker = p(value)?,
            "agents_min" => self.agents_min = p(value)?,
            "agents_max" => self.agents_max = p(value)?,
            "total_steps" => self.total_steps = p(value)?,
            "seed" => self.seed = p(value)?,
            "map" => self.map = value.parse().map_err(|e| format!("{e}"))?,
            "vary_map" => self.vary_map = p(value)?,
            "episode_length" => self.episode_length = p(value)?,
            "segment_length" => self.segment_length = p(value)?,
            "max_grad_norm" => self.max_grad_norm = p(value)?,
            "use_static_cost" => self.use_static_cost = p(value)?,
            "use_dynamic_cost" => self.use_dynamic_cost = p(value)?,
            "validation_interval" => self.validation_interval = p(value)?,
            "validation_episodes" => self.validation_episodes = p(value)?,
            "validation_agents" => self.validation_agents = p(value)?,
            "checkpoint_interval" => self.checkpoint_interval = p(value)?,
            "out_dir" => self.out_dir = (!value.is_empty()).then(|| PathBuf::from(value)),
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }
}

impl FromStr for TrainConfig {
    type Err = TrainError;

    /// Unset keys take the published defaults of the configured `arch`
    /// (FollowerLite when `arch` is absent). `#` starts a comment.
    fn from_str(text: &str) -> Result<Self, TrainError> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| TrainError::Config(format!("line {}: expected `key = value`", i + 1)))?;
            pairs.push((i + 1, k.trim(), v.trim()));
        }
        let arch = pairs.iter().rev().find(|(_, k, _)| *k == "arch").map(|(_, _, v)| *v);
        let mut cfg = match arch {
            None => Self::follower_lite(),
            Some(a) => Self::defaults_for(a).ok_or_else(|| TrainError::Config(format!("unknown arch `{a}`")))?,
        };
        for (line, k, v) in pairs {
            cfg.set(k, v)
                .map_err(|m| TrainError::Config(format!("line {line}: {k}: {m}")))?;
        }
        Ok(cfg)
    }
}
