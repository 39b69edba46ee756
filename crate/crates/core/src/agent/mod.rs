//! Actor-critic decision making over the hierarchical action space.

mod action;
mod nets;
mod policy;
mod replay;
mod state;
mod td3;
pub mod toy;
mod train;

use thiserror::Error;

pub use action::{ControlCommand, Maneuver, ACCEL_BOUND, HEADING_BOUND};
pub use nets::{decode, Actor, ActorOutput, Critic};
pub use policy::{ActorPolicy, IntentTracker, StateEncoder, INTENT_REFRESH_TICKS};
pub use replay::{ReplayBuffer, Transition};
pub use state::{StateVector, EGO_FEATURES, INTENT_FEATURES, NEIGHBOR_FEATURES, STATE_DIM};
pub use td3::{act_with_exploration, twin_min, ManeuverChoice, Td3, Td3Config, UpdateStats};
pub use train::{train_agent, train_agent_with, training_episode_seed, AgentTrainConfig, EpisodeStat};

/// Maneuver probabilities plus heading and acceleration in `[-1, 1]`.
pub const ACTION_DIM: usize = 5;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("agent config: {0}")]
    Config(String),
    #[error("non-finite loss at update {update}: {detail}")]
    NonFiniteLoss { update: usize, detail: String },
    #[error(transparent)]
    Neural(#[from] crate::neural::NeuralError),
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
}
