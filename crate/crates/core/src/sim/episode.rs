//! Episode loop: policy in, rewards and logs out.

use thiserror::Error;

use super::engine::{EgoMode, SimEvent, World};
use super::idm::IdmParams;
use crate::agent::ControlCommand;
use crate::reward::{time_to_collision, RewardBreakdown, RewardError, RewardTracker, RewardWeights, TTC_RANGE};
use crate::row::{PairScope, RowError, RowParams, ViolationTracker};
use crate::world::{EpisodeLog, NeighborSet, Outcome, ScenarioConfig, TickRecord, WorldError, EGO_ID, NEIGHBOR_CAP};

/// Leaders beyond this distance do not count for time headway, meters.
pub const THW_RANGE: f64 = 100.0;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct PolicyError(pub String);

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Row(#[from] RowError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error("episode aborted at tick {tick}: {source}")]
    EpisodeAborted { tick: usize, source: PolicyError },
}

/// Which vehicles each tick record keeps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LogDetail {
    Full,
    /// Ego plus vehicles within `radius` meters along the road.
    Local { radius: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeOptions {
    pub reward: RewardWeights,
    pub detail: LogDetail,
    pub ego_mode: EgoMode,
}

impl Default for EpisodeOptions {
    fn default() -> Self {
        Self {
            reward: RewardWeights::default(),
            detail: LogDetail::Local { radius: 120.0 },
            ego_mode: EgoMode::Controlled,
        }
    }
}

pub struct Observation<'a> {
    pub tick: usize,
    pub world: &'a World,
    pub neighbors: &'a NeighborSet,
}

pub trait DecisionPolicy {
    /// Called once before the first tick of every episode.
    fn reset(&mut self) {}
    fn decide(&mut self, obs: &Observation<'_>) -> Result<ControlCommand, PolicyError>;
}

impl<P: DecisionPolicy + ?Sized> DecisionPolicy for &mut P {
    fn reset(&mut self) {
        (**self).reset()
    }
    fn decide(&mut self, obs: &Observation<'_>) -> Result<ControlCommand, PolicyError> {
        (**self).decide(obs)
    }
}

impl<P: DecisionPolicy + ?Sized> DecisionPolicy for Box<P> {
    fn reset(&mut self) {
        (**self).reset()
    }
    fn decide(&mut self, obs: &Observation<'_>) -> Result<ControlCommand, PolicyError> {
        (**self).decide(obs)
    }
}

/// Always returns the same command.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroPolicy(pub ControlCommand);

impl DecisionPolicy for ZeroPolicy {
    fn decide(&mut self, _: &Observation<'_>) -> Result<ControlCommand, PolicyError> {
        Ok(self.0)
    }
}

/// Replays a recorded command sequence.
#[derive(Clone, Debug)]
pub struct ScriptedPolicy {
    actions: Vec<ControlCommand>,
    next: usize,
}

impl ScriptedPolicy {
    pub fn new(actions: Vec<ControlCommand>) -> Self {
        Self { actions, next: 0 }
    }

    pub fn from_log(log: &EpisodeLog) -> Self {
        Self::new(log.ticks.iter().map(|t| t.action).collect())
    }
}

impl DecisionPolicy for ScriptedPolicy {
    fn reset(&mut self) {
        self.next = 0;
    }
    fn decide(&mut self, _: &Observation<'_>) -> Result<ControlCommand, PolicyError> {
        let a = self
            .actions
            .get(self.next)
            .copied()
            .ok_or_else(|| PolicyError(format!("script exhausted after {} actions", self.actions.len())))?;
        self.next += 1;
        Ok(a)
    }
}

/// Lane-keeping car follower for the ego.
#[derive(Clone, Copy, Debug)]
pub struct IdmEgoPolicy {
    pub idm: IdmParams,
}

impl IdmEgoPolicy {
    pub fn new(desired_speed: f64) -> Self {
        Self {
            idm: IdmParams {
                desired_speed,
                time_headway: 1.5,
                min_gap: 2.0,
                max_accel: 1.5,
                comfortable_decel: 2.0,
            },
        }
    }
}

impl DecisionPolicy for IdmEgoPolicy {
    fn decide(&mut self, obs: &Observation<'_>) -> Result<ControlCommand, PolicyError> {
        let ego = obs.world.ego();
        let leader = obs
            .world
            .leader_of(0, f64::INFINITY)
            .map(|(j, gap)| (gap, obs.world.vehicles[j].v_x));
        Ok(ControlCommand::keep(self.idm.accel(ego.v_x, leader).max(-5.0)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub reward: RewardBreakdown,
    pub outcome: Option<Outcome>,
    pub events: Vec<SimEvent>,
}

/// A running episode, steppable one tick at a time.
pub struct Episode {
    world: World,
    violations: ViolationTracker,
    rewards: RewardTracker,
    params: RowParams,
    detail: LogDetail,
    ticks: Vec<TickRecord>,
    outcome: Option<Outcome>,
}

impl Episode {
    pub fn new(config: &ScenarioConfig, opts: &EpisodeOptions) -> Result<Self, SimError> {
        opts.reward.validate()?;
        let params = RowParams::from_scenario(config)?;
        Ok(Self {
            world: World::new(config, opts.ego_mode)?,
            violations: ViolationTracker::new(),
            rewards: RewardTracker::new(opts.reward.clone()),
            params,
            detail: opts.detail,
            ticks: Vec::with_capacity(config.max_ticks),
            outcome: None,
        })
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn is_done(&self) -> bool {
        self.outcome.is_some()
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.outcome
    }

    pub fn ticks(&self) -> &[TickRecord] {
        &self.ticks
    }

    pub fn neighbors(&self) -> NeighborSet {
        NeighborSet::gather(&self.world.vehicles, 0, &self.world.config, NEIGHBOR_CAP)
    }

    /// Advance one tick with `cmd` for the ego.
    ///
    /// # Panics
    /// If the episode already ended.
    pub fn step(&mut self, cmd: &ControlCommand) -> StepResult {
        assert!(self.outcome.is_none(), "episode already finished");
        let cfg = &self.world.config;
        let dt = cfg.tick;
        let max_ticks = cfg.max_ticks;
        let events = self.world.step(cmd, dt);
        let tick = self.world.tick();
        let cfg = &self.world.config;
        let ego_hit = events
            .iter()
            .any(|e| matches!(*e, SimEvent::Collision { a, b } if a == EGO_ID || b == EGO_ID));
        let off_road = events.contains(&SimEvent::OffRoad { id: EGO_ID });
        let outcome = if ego_hit {
            Some(Outcome::Collision)
        } else if off_road {
            Some(Outcome::WrongLane)
        } else if tick >= max_ticks {
            Some(Outcome::SafeArrived)
        } else {
            None
        };
        let (violations, changes) =
            self.violations
                .detect(&self.world.vehicles, tick, cfg, self.params, PairScope::Involving(EGO_ID));
        let ego = *self.world.ego();
        let ttc = self
            .world
            .leader_of(0, TTC_RANGE)
            .map(|(j, gap)| time_to_collision(gap, ego.v_x, self.world.vehicles[j].v_x))
            .unwrap_or(f64::INFINITY);
        let reward = self.rewards.step(&ego, tick as f64 * dt, ttc, &changes, outcome);
        let vehicles = match self.detail {
            LogDetail::Full => self.world.vehicles.clone(),
            LogDetail::Local { radius } => self
                .world
                .vehicles
                .iter()
                .filter(|v| v.id == EGO_ID || cfg.ring_dx(ego.x, v.x).abs() <= radius)
                .copied()
                .collect(),
        };
        self.ticks.push(TickRecord {
            tick,
            vehicles,
            action: *cmd,
            reward,
            violations,
            events: events.clone(),
        });
        self.outcome = outcome;
        StepResult {
            reward,
            outcome,
            events,
        }
    }

    pub fn into_log(self) -> EpisodeLog {
        EpisodeLog {
            scenario: self.world.config.clone(),
            ticks: self.ticks,
            outcome: self.outcome.unwrap_or(Outcome::Timeout),
        }
    }
}

/// Run one episode to termination.
pub fn run_episode(
    config: &ScenarioConfig,
    policy: &mut dyn DecisionPolicy,
    opts: &EpisodeOptions,
) -> Result<EpisodeLog, SimError> {
    policy.reset();
    let mut ep = Episode::new(config, opts)?;
    while !ep.is_done() {
        let neighbors = ep.neighbors();
        let tick = ep.world().tick();
        let cmd = policy
            .decide(&Observation {
                tick,
                world: ep.world(),
                neighbors: &neighbors,
            })
            .map_err(|source| SimError::EpisodeAborted { tick, source })?;
        ep.step(&cmd);
    }
    Ok(ep.into_log())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_policy_on_empty_road_arrives_safely() {
        let cfg = ScenarioConfig {
            density: 1.0,
            max_ticks: 200,
            ..Default::default()
        };
        let log = run_episode(&cfg, &mut ZeroPolicy::default(), &EpisodeOptions::default()).unwrap();
        assert_eq!(log.outcome, Outcome::SafeArrived);
        assert_eq!(log.ticks.len(), 200);
    }

    #[test]
    fn same_seed_same_log_bytes() {
        let cfg = ScenarioConfig {
            max_ticks: 150,
            rng_seed: 9,
            ..Default::default()
        };
        let opts = EpisodeOptions {
            detail: LogDetail::Full,
            ..Default::default()
        };
        let a = run_episode(&cfg, &mut IdmEgoPolicy::new(15.0), &opts).unwrap();
        let b = run_episode(&cfg, &mut IdmEgoPolicy::new(15.0), &opts).unwrap();
        assert_eq!(a.to_jsonl_bytes(), b.to_jsonl_bytes());
    }

    #[test]
    fn policy_failure_aborts() {
        let cfg = ScenarioConfig {
            max_ticks: 50,
            ..Default::default()
        };
        let err = run_episode(&cfg, &mut ScriptedPolicy::new(vec![ControlCommand::keep(0.0); 5]), &EpisodeOptions::default())
            .unwrap_err();
        assert!(matches!(err, SimError::EpisodeAborted { tick: 5, .. }));
    }

    #[test]
    fn scripted_replay_reproduces_log() {
        let cfg = ScenarioConfig {
            max_ticks: 120,
            rng_seed: 4,
            ..Default::default()
        };
        let opts = EpisodeOptions::default();
        let a = run_episode(&cfg, &mut IdmEgoPolicy::new(14.0), &opts).unwrap();
        let b = run_episode(&cfg, &mut ScriptedPolicy::from_log(&a), &opts).unwrap();
        assert_eq!(a, b);
    }
}
