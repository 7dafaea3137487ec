//! PPO training of the shared follower policy.

mod adam;
mod config;
mod gae;
mod ppo;
mod rollout;
mod trainer;

pub use adam::{clip_grad_norm, Adam};
pub use config::TrainConfig;
pub use gae::compute_gae;
pub use ppo::{
    all_chunks, buffer_advantages, minibatch_loss, normalize_advantages, normalized_for, ppo_update, sample_loss,
    Chunk, LossCoefs, PpoStats, SampleLoss,
};
pub use rollout::{collect_rollouts, cost_config, EnvSlot, EpisodeFactory, RolloutBuffer};
pub use trainer::{train, validate, LogRow, TrainOutcome, LOG_HEADER};

use crate::env::EnvError;
use crate::maps::MapError;
use crate::policy::PolicyError;
use crate::solver::SolverError;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("non-finite values during update: {0}")]
    NonFinite(String),
    #[error("i/o after {step} steps: {source}")]
    Io { step: u64, source: std::io::Error },
}
