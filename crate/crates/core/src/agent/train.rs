//! Environment interaction loop feeding the TD3 learner.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::policy::StateEncoder;
use super::replay::{ReplayBuffer, Transition};
use super::td3::{act_with_exploration, ManeuverChoice, Td3};
use super::{AgentError, ACTION_DIM};
use crate::intention::StaModel;
use crate::sim::{Episode, EpisodeOptions, Observation};
use crate::world::{Outcome, ScenarioConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentTrainConfig {
    /// Upper bound on training episodes.
    pub episodes: usize,
    /// Training stops once this many learner updates have run.
    pub max_updates: usize,
    /// Environment steps collected before the first update.
    pub warmup_steps: usize,
    /// Standard deviation of exploration noise on the continuous heads.
    pub exploration_noise: f64,
    /// Chance per decision that the maneuver is sampled from the actor's
    /// softmax instead of taken as the argmax.
    pub maneuver_sample_prob: f64,
    /// Learner updates between checkpoint hook calls; 0 disables the hook.
    pub checkpoint_every: usize,
    pub seed: u64,
}

impl Default for AgentTrainConfig {
    fn default() -> Self {
        Self {
            episodes: 1000,
            max_updates: 20_000,
            warmup_steps: 1000,
            exploration_noise: 0.1,
            maneuver_sample_prob: 0.05,
            checkpoint_every: 500,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStat {
    pub episode: usize,
    pub steps: usize,
    /// Sum of per-tick total rewards.
    pub reward: f64,
    pub outcome: Outcome,
    pub updates: usize,
}

impl EpisodeStat {
    pub fn success(&self) -> bool {
        self.outcome == Outcome::SafeArrived
    }
}

/// Seed of training episode `e`.
pub fn training_episode_seed(base: u64, e: usize) -> u64 {
    base.wrapping_mul(0x2545_F491_4F6C_DD1D) ^ (e as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Run exploring episodes, storing transitions and updating `td3` once per
/// environment step after warm-up. Returns one record per episode.
pub fn train_agent(
    td3: &mut Td3,
    scenario: &ScenarioConfig,
    opts: &EpisodeOptions,
    intent_model: Option<Arc<StaModel>>,
    cfg: &AgentTrainConfig,
) -> Result<Vec<EpisodeStat>, AgentError> {
    train_agent_with(td3, scenario, opts, intent_model, cfg, |_| Ok(()))
}

/// As [`train_agent`], calling `checkpoint` every `cfg.checkpoint_every`
/// updates.
pub fn train_agent_with<F>(
    td3: &mut Td3,
    scenario: &ScenarioConfig,
    opts: &EpisodeOptions,
    intent_model: Option<Arc<StaModel>>,
    cfg: &AgentTrainConfig,
    mut checkpoint: F,
) -> Result<Vec<EpisodeStat>, AgentError>
where
    F: FnMut(&Td3) -> Result<(), AgentError>,
{
    let mut buffer = ReplayBuffer::new(td3.config.buffer_capacity);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut act_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    act_rng.set_stream(3);
    let mut encoder = StateEncoder::new(intent_model);
    let mut curve = Vec::new();
    let mut env_steps = 0usize;
    for e in 0..cfg.episodes {
        if td3.updates() >= cfg.max_updates {
            break;
        }
        let sc = ScenarioConfig {
            rng_seed: training_episode_seed(cfg.seed, e),
            ..scenario.clone()
        };
        let mut ep = Episode::new(&sc, opts)?;
        encoder.reset();
        let mut pending: Option<(Vec<f64>, [f64; ACTION_DIM], f64)> = None;
        let mut total = 0.0;
        let mut steps = 0;
        loop {
            let neighbors = ep.neighbors();
            let s = encoder
                .encode(&Observation {
                    tick: ep.world().tick(),
                    world: ep.world(),
                    neighbors: &neighbors,
                })
                .0;
            if let Some((ps, pa, pr)) = pending.take() {
                buffer.push(Transition {
                    state: ps,
                    action: pa,
                    reward: pr,
                    next_state: s.clone(),
                    done: false,
                });
            }
            let choice = if act_rng.random::<f64>() < cfg.maneuver_sample_prob {
                ManeuverChoice::Sample
            } else {
                ManeuverChoice::Argmax
            };
            let (cmd, a) = act_with_exploration(&td3.actor, &s, cfg.exploration_noise, choice, &mut act_rng);
            let res = ep.step(&cmd);
            total += res.reward.total;
            steps += 1;
            env_steps += 1;
            if let Some(outcome) = res.outcome {
                // A timeout truncates the episode; the state is not terminal.
                buffer.push(Transition {
                    next_state: s.clone(),
                    state: s,
                    action: a,
                    reward: res.reward.total,
                    done: outcome != Outcome::Timeout,
                });
            } else {
                pending = Some((s, a, res.reward.total));
            }
            if env_steps >= cfg.warmup_steps && buffer.len() >= td3.config.batch_size && td3.updates() < cfg.max_updates {
                td3.update(&buffer, &mut rng)?;
                if cfg.checkpoint_every > 0 && td3.updates() % cfg.checkpoint_every == 0 {
                    checkpoint(td3)?;
                }
            }
            if res.outcome.is_some() {
                break;
            }
        }
        curve.push(EpisodeStat {
            episode: e,
            steps,
            reward: total,
            outcome: ep.outcome().expect("loop ends on an outcome"),
            updates: td3.updates(),
        });
    }
    Ok(curve)
}
