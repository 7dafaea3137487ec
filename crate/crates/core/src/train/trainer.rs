//! The collect / update loop.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::Adam;
use super::ppo::ppo_update;
use super::rollout::{collect_rollouts, EpisodeFactory};
use super::{TrainConfig, TrainError};
use crate::env::{splitmix64, EpisodeConfig};
use crate::policy::{save_checkpoint, PolicyParams};
use crate::solver::{run_episode, Solver};

pub const LOG_HEADER: &str = "step,mean_reward,surrogate_loss,value_loss,entropy,clip_fraction,val_throughput";

/// One row of the training log, written after every update.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    /// Agent transitions collected so far.
    pub step: u64,
    /// Mean per-transition reward of the round that fed this update.
    pub mean_reward: f64,
    pub surrogate_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub val_throughput: Option<f64>,
}

impl LogRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.step,
            self.mean_reward,
            self.surrogate_loss,
            self.value_loss,
            self.entropy,
            self.clip_fraction,
            self.val_throughput.map(|v| v.to_string()).unwrap_or_default()
        )
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: PolicyParams,
    pub rows: Vec<LogRow>,
    pub steps: u64,
    pub updates: usize,
}

struct Outputs {
    dir: PathBuf,
    log: BufWriter<File>,
}

impl Outputs {
    fn open(dir: &Path, config: &TrainConfig) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("config.txt"), config.to_text())?;
        let mut log = BufWriter::new(File::create(dir.join("train_log.csv"))?);
        writeln!(log, "{LOG_HEADER}")?;
        log.flush()?;
        Ok(Self {
            dir: dir.to_path_buf(),
            log,
        })
    }

    fn row(&mut self, row: &LogRow) -> std::io::Result<()> {
        writeln!(self.log, "{}", row.to_csv())?;
        self.log.flush()
    }

    fn checkpoint(&self, name: &str, params: &PolicyParams) -> std::io::Result<()> {
        save_checkpoint(self.dir.join(name), params)
    }
}

/// Mean throughput of the policy over a fixed, seeded set of validation episodes.
pub fn validate(params: &PolicyParams, config: &TrainConfig, factory: &EpisodeFactory) -> Result<f64, TrainError> {
    let solver = Solver::Learned {
        params: Arc::new(params.clone()),
        greedy: false,
    };
    let base = splitmix64(config.seed ^ 0x7A11_DA7E);
    let mut sum = 0.0;
    for k in 0..config.validation_episodes as u64 {
        let ep = EpisodeConfig::new(
            factory.base_grid().clone(),
            config.validation_agents,
            config.episode_length,
            base.wrapping_add(k),
        );
        sum += run_episode(ep, factory.base_costs().clone(), factory.cost(), &solver)?.throughput();
    }
    Ok(sum / config.validation_episodes as f64)
}

/// Train from an orthogonal initialization seeded by `config.seed`.
///
/// With `config.out_dir` set, writes `config.txt`, `train_log.csv`, periodic
/// `checkpoint_<update>.ckpt` files and `final.ckpt` there.
pub fn train(config: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let arch = config.architecture()?;
    let chunk_len = config.chunk_len()?;
    let mut params = PolicyParams::init_orthogonal(arch, config.seed)?;
    let mut adam = Adam::new(params.len(), config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(config.seed ^ 0x5B0_0DA7E));
    let factory = EpisodeFactory::new(config, params.arch().memory_size())?;
    let mut slots = factory.spawn(config)?;

    let mut outputs = match &config.out_dir {
        Some(dir) => Some(Outputs::open(dir, config).map_err(|source| TrainError::Io { step: 0, source })?),
        None => None,
    };
    let mut rows = Vec::new();
    let mut steps = 0u64;
    let mut updates = 0usize;
    while steps < config.total_steps {
        let buf = collect_rollouts(
            &mut slots,
            &factory,
            &params,
            config.segment_length,
            chunk_len,
            config.rollout_workers,
        )?;
        steps += buf.len() as u64;
        let stats = ppo_update(&mut params, &buf, config, &mut adam, &mut rng)?;
        updates += 1;
        let val_throughput = if config.validation_interval > 0 && updates.is_multiple_of(config.validation_interval) {
            Some(validate(&params, config, &factory)?)
        } else {
            None
        };
        let row = LogRow {
            step: steps,
            mean_reward: buf.mean_reward(),
            surrogate_loss: stats.surrogate_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            clip_fraction: stats.clip_fraction,
            val_throughput,
        };
        log::info!(
            "step {} reward {:.5} entropy {:.3} clip {:.3}{}",
            steps,
            row.mean_reward,
            row.entropy,
            row.clip_fraction,
            val_throughput.map(|v| format!(" val {v:.4}")).unwrap_or_default()
        );
        if let Some(out) = outputs.as_mut() {
            let io = |source| TrainError::Io { step: steps, source };
            out.row(&row).map_err(io)?;
            if config.checkpoint_interval > 0 && updates.is_multiple_of(config.checkpoint_interval) {
                out.checkpoint(&format!("checkpoint_{updates}.ckpt"), &params)
                    .map_err(io)?;
            }
        }
        rows.push(row);
    }
    if let Some(out) = &outputs {
        out.checkpoint("final.ckpt", &params)
            .map_err(|source| TrainError::Io { step: steps, source })?;
    }
    Ok(TrainOutcome {
        params,
        rows,
        steps,
        updates,
    })
}
