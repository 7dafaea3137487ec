//! The learnable follower: input encoding, network, action selection and the
//! per-agent decision pipeline.

mod agent;
mod arch;
mod checkpoint;
mod encode;
mod net;
mod ops;

pub use agent::{compute_reward, sample_action, AgentContext, AgentView, Decision, WAYPOINT_REWARD};
pub use arch::{
    Architecture, ConvSlots, GruSlots, Layout, LinearSlots, Projection, Slot, FOLLOWER_LITE_PARAMS, FOLLOWER_PARAMS,
    INPUT_CHANNELS, NUM_ACTIONS,
};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use encode::{encode_observation, PolicyInput};
pub use net::{log_softmax, softmax, Logits, PolicyOutput, PolicyParams, SequenceCache};

use crate::grid::Pos;

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("architecture {arch} expects {expected} parameters, got {got}")]
    ParamCount { arch: String, expected: usize, got: usize },
    #[error("network input has {got} values, expected {expected}")]
    InputShape { expected: usize, got: usize },
    #[error("recurrent memory has {got} values, expected {expected}")]
    MemoryShape { expected: usize, got: usize },
    #[error("non-finite logits {0:?}")]
    NonFiniteLogits([f64; NUM_ACTIONS]),
    #[error("no path from {from} to {to}")]
    NoPath { from: Pos, to: Pos },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
}
