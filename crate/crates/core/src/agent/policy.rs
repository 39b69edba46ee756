//! Driving policies backed by an actor network.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::nets::Actor;
use super::state::StateVector;
use super::td3::{act_with_exploration, ManeuverChoice};
use super::ACTION_DIM;
use crate::intention::{infer_intention, push_frame, StaModel};
use crate::sim::{DecisionPolicy, Observation, PolicyError};
use crate::world::{IntentLabel, NeighborSet, ScenarioConfig, VehicleState};
use crate::agent::ControlCommand;

/// Intentions are re-inferred every this many ticks.
pub const INTENT_REFRESH_TICKS: usize = 10;

/// Per-neighbor frame histories and the latest inferred intentions.
#[derive(Clone, Debug)]
pub struct IntentTracker {
    model: Arc<StaModel>,
    frames: BTreeMap<u32, (usize, VecDeque<Vec<f64>>)>,
    labels: BTreeMap<u32, IntentLabel>,
}

impl IntentTracker {
    pub fn new(model: Arc<StaModel>) -> Self {
        Self {
            model,
            frames: BTreeMap::new(),
            labels: BTreeMap::new(),
        }
    }

    pub fn reset(&mut self) {
        self.frames.clear();
        self.labels.clear();
    }

    /// Record the current frame of every neighbor in `set`, refresh
    /// intentions on schedule, and write them into `set`.
    pub fn observe(&mut self, tick: usize, vehicles: &[VehicleState], cfg: &ScenarioConfig, set: &mut NeighborSet) {
        let steps = self.model.config().steps;
        for nb in &set.neighbors {
            let id = nb.state.id;
            let Some(i) = vehicles.iter().position(|v| v.id == id) else { continue };
            let mut frame = Vec::new();
            push_frame(vehicles, i, cfg, &mut frame);
            let entry = self.frames.entry(id).or_insert_with(|| (tick, VecDeque::new()));
            // A gap in visibility restarts the track.
            if entry.0 + 1 != tick && !entry.1.is_empty() {
                entry.1.clear();
            }
            entry.0 = tick;
            if entry.1.len() == steps {
                entry.1.pop_front();
            }
            entry.1.push_back(frame);
        }
        self.frames.retain(|_, (last, _)| *last + steps >= tick);
        if tick % INTENT_REFRESH_TICKS == 0 {
            self.labels.clear();
            for nb in &set.neighbors {
                if let Some((_, track)) = self.frames.get(&nb.state.id) {
                    let flat: Vec<f64> = track.iter().flatten().copied().collect();
                    if let Ok((label, _)) = infer_intention(&self.model, &flat) {
                        self.labels.insert(nb.state.id, label);
                    }
                }
            }
        }
        for nb in &mut set.neighbors {
            nb.intention = self.labels.get(&nb.state.id).copied();
        }
    }
}

/// Builds state vectors from observations, with or without intentions.
#[derive(Clone, Debug)]
pub struct StateEncoder {
    tracker: Option<IntentTracker>,
}

impl StateEncoder {
    /// `None` leaves every intention slot at zero.
    pub fn new(intent_model: Option<Arc<StaModel>>) -> Self {
        Self {
            tracker: intent_model.map(IntentTracker::new),
        }
    }

    pub fn uses_intentions(&self) -> bool {
        self.tracker.is_some()
    }

    pub fn reset(&mut self) {
        if let Some(t) = &mut self.tracker {
            t.reset();
        }
    }

    pub fn encode(&mut self, obs: &Observation<'_>) -> StateVector {
        let cfg = &obs.world.config;
        match &mut self.tracker {
            Some(t) => {
                let mut set = obs.neighbors.clone();
                t.observe(obs.tick, &obs.world.vehicles, cfg, &mut set);
                StateVector::encode(&set, cfg, true)
            }
            None => StateVector::encode(obs.neighbors, cfg, false),
        }
    }
}

/// Deterministic or exploring actor policy for the ego.
#[derive(Clone, Debug)]
pub struct ActorPolicy {
    pub actor: Actor,
    encoder: StateEncoder,
    noise: f64,
    choice: ManeuverChoice,
    seed: u64,
    rng: ChaCha8Rng,
    last: Option<(StateVector, [f64; ACTION_DIM])>,
}

impl ActorPolicy {
    /// Greedy policy: argmax maneuver, no noise.
    pub fn greedy(actor: Actor, intent_model: Option<Arc<StaModel>>) -> Self {
        Self::exploring(actor, intent_model, 0.0, ManeuverChoice::Argmax, 0)
    }

    pub fn exploring(
        actor: Actor,
        intent_model: Option<Arc<StaModel>>,
        noise: f64,
        choice: ManeuverChoice,
        seed: u64,
    ) -> Self {
        Self {
            actor,
            encoder: StateEncoder::new(intent_model),
            noise,
            choice,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            last: None,
        }
    }

    /// State and critic-space action of the latest decision.
    pub fn last_decision(&self) -> Option<&(StateVector, [f64; ACTION_DIM])> {
        self.last.as_ref()
    }

    pub fn encoder_mut(&mut self) -> &mut StateEncoder {
        &mut self.encoder
    }

    pub fn set_noise(&mut self, noise: f64) {
        self.noise = noise;
    }

    /// Restart the exploration stream, e.g. per episode.
    pub fn reseed(&mut self, seed: u64) {
        self.seed = seed;
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }
}

impl DecisionPolicy for ActorPolicy {
    fn reset(&mut self) {
        self.encoder.reset();
        self.rng = ChaCha8Rng::seed_from_u64(self.seed);
        self.last = None;
    }

    fn decide(&mut self, obs: &Observation<'_>) -> Result<ControlCommand, PolicyError> {
        let s = self.encoder.encode(obs);
        if let Some(v) = s.0.iter().find(|v| !v.is_finite()) {
            return Err(PolicyError(format!("non-finite state value {v}")));
        }
        let (cmd, a) = act_with_exploration(&self.actor, &s.0, self.noise, self.choice, &mut self.rng);
        self.last = Some((s, a));
        Ok(cmd)
    }
}
