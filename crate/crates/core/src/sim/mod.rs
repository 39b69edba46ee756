//! Traffic simulation: world stepping, NPC behaviour and episode running.

mod engine;
mod episode;
pub mod idm;

pub use engine::{
    EgoMode, LateralPhase, NpcPolicy, SimEvent, World, EGO_CENTERING_GAIN, LANE_CHANGE_DURATION, NPC_COOLDOWN,
    NPC_DECISION_PERIOD, NPC_PREP_TIME,
};
pub use episode::{
    run_episode, DecisionPolicy, Episode, EpisodeOptions, IdmEgoPolicy, LogDetail, Observation, PolicyError, ScriptedPolicy,
    SimError, StepResult, ZeroPolicy, THW_RANGE,
};
pub use idm::{IdmParams, LaneChangeRule, EMERGENCY_DECEL};
