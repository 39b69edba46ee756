//! Twin delayed deep deterministic policy gradient learner.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::nets::{argmax3, decode, Actor, ActorOutput, Critic};
use super::replay::{ReplayBuffer, Transition};
use super::{AgentError, ControlCommand, ACTION_DIM};
use crate::neural::{soft_update, Adam, LinearAnneal, Parameterized};
use crate::par;

/// Batches are split into this many gradient chunks, summed in order, so
/// results do not depend on the worker count.
const GRAD_CHUNKS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Td3Config {
    pub gamma: f64,
    /// Soft target update rate.
    pub tau: f64,
    pub policy_delay: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Target-policy smoothing noise on the continuous heads.
    pub smoothing_sigma: f64,
    pub smoothing_clip: f64,
    pub hidden: Vec<usize>,
    pub actor_lr: LinearAnneal,
    pub critic_lr: LinearAnneal,
    pub max_grad_norm: f64,
    /// Critic-only updates before the actor starts learning.
    pub actor_warmup: usize,
}

impl Default for Td3Config {
    fn default() -> Self {
        let lr = LinearAnneal {
            start: 1e-3,
            end: 1e-6,
            steps: 20_000,
        };
        Self {
            gamma: 0.97,
            tau: 1e-3,
            policy_delay: 2,
            batch_size: 256,
            buffer_capacity: 1_000_000,
            smoothing_sigma: 0.2,
            smoothing_clip: 0.5,
            hidden: vec![128, 128],
            actor_lr: lr,
            critic_lr: lr,
            max_grad_norm: 10.0,
            actor_warmup: 0,
        }
    }
}

impl Td3Config {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if self.policy_delay == 0 || self.batch_size == 0 || self.buffer_capacity == 0 {
            return bad("policy_delay, batch_size and buffer_capacity must be positive");
        }
        if self.smoothing_sigma < 0.0 || self.smoothing_clip < 0.0 {
            return bad("smoothing parameters must be non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub critic_loss: f64,
    /// Mean −Q1(s, π(s)) when the actor was updated.
    pub actor_loss: Option<f64>,
}

/// How the discrete maneuver is chosen when acting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ManeuverChoice {
    Argmax,
    Sample,
}

/// Online and target networks with their optimizers.
#[derive(Clone, Debug)]
pub struct Td3 {
    pub config: Td3Config,
    pub actor: Actor,
    pub critics: [Critic; 2],
    pub actor_target: Actor,
    pub critic_targets: [Critic; 2],
    actor_opt: Adam,
    critic_opts: [Adam; 2],
    updates: usize,
    actor_updates: usize,
}

impl Td3 {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, config: Td3Config, rng: &mut R) -> Result<Self, AgentError> {
        config.validate()?;
        let actor = Actor::new(state_dim, &config.hidden, rng);
        let critics = [
            Critic::new("critic1", state_dim, &config.hidden, rng),
            Critic::new("critic2", state_dim, &config.hidden, rng),
        ];
        Ok(Self::assemble(config, actor, critics))
    }

    /// Start from an existing actor, e.g. an evolved one.
    pub fn with_actor<R: Rng + ?Sized>(actor: Actor, config: Td3Config, rng: &mut R) -> Result<Self, AgentError> {
        config.validate()?;
        let d = actor.state_dim();
        let critics = [
            Critic::new("critic1", d, &config.hidden, rng),
            Critic::new("critic2", d, &config.hidden, rng),
        ];
        Ok(Self::assemble(config, actor, critics))
    }

    fn assemble(config: Td3Config, actor: Actor, critics: [Critic; 2]) -> Self {
        let clip = config.max_grad_norm;
        let adam = |n: usize, s: LinearAnneal| {
            let a = Adam::new(n, s);
            if clip > 0.0 { a.with_clip(clip) } else { a }
        };
        Self {
            actor_opt: adam(actor.param_count(), config.actor_lr),
            critic_opts: [
                adam(critics[0].param_count(), config.critic_lr),
                adam(critics[1].param_count(), config.critic_lr),
            ],
            actor_target: actor.clone(),
            critic_targets: critics.clone(),
            actor,
            critics,
            config,
            updates: 0,
            actor_updates: 0,
        }
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn actor_updates(&self) -> usize {
        self.actor_updates
    }

    /// Smoothed target action for `next_state`.
    fn target_action<R: Rng + ?Sized>(&self, next_state: &[f64], rng: &mut R) -> [f64; ACTION_DIM] {
        let mut a = self.actor_target.forward(next_state).action;
        let c = self.config.smoothing_clip;
        for v in &mut a[3..] {
            let eps: f64 = rng.sample::<f64, _>(StandardNormal) * self.config.smoothing_sigma;
            *v = (*v + eps.clamp(-c, c)).clamp(-1.0, 1.0);
        }
        a
    }

    /// Bellman target `r + γ·(1 − done)·min(Q1', Q2')`.
    pub fn bellman_target(&self, t: &Transition, next_action: &[f64; ACTION_DIM]) -> f64 {
        if t.done {
            return t.reward;
        }
        let q1 = self.critic_targets[0].q(&t.next_state, next_action);
        let q2 = self.critic_targets[1].q(&t.next_state, next_action);
        t.reward + self.config.gamma * twin_min(q1, q2)
    }

    /// One learner step on a uniform batch.
    pub fn update<R: Rng + ?Sized>(&mut self, buffer: &ReplayBuffer, rng: &mut R) -> Result<UpdateStats, AgentError> {
        if buffer.len() < self.config.batch_size {
            return Err(AgentError::Config(format!(
                "buffer holds {} transitions, batch needs {}",
                buffer.len(),
                self.config.batch_size
            )));
        }
        let idx = buffer.sample_indices(self.config.batch_size, rng);
        let batch: Vec<&Transition> = idx.iter().map(|&i| buffer.get(i)).collect();
        // Target noise is drawn sequentially so the stream stays fixed.
        let next_actions: Vec<[f64; ACTION_DIM]> = batch.iter().map(|t| self.target_action(&t.next_state, rng)).collect();
        let n = batch.len() as f64;
        let chunk = batch.len().div_ceil(GRAD_CHUNKS);
        let ranges: Vec<(usize, usize)> = (0..batch.len()).step_by(chunk).map(|s| (s, (s + chunk).min(batch.len()))).collect();

        let parts = par::map_slice(&ranges, |_, &(lo, hi)| {
            let mut g = [vec![0.0; self.critics[0].param_count()], vec![0.0; self.critics[1].param_count()]];
            let mut loss = 0.0;
            for k in lo..hi {
                let t = batch[k];
                let y = self.bellman_target(t, &next_actions[k]);
                for c in 0..2 {
                    let (q, cache) = self.critics[c].q_cached(&t.state, &t.action);
                    let err = q - y;
                    loss += err * err;
                    self.critics[c].backward(&cache, 2.0 * err / n, &mut g[c]);
                }
            }
            (g, loss)
        });
        let mut grads = [vec![0.0; self.critics[0].param_count()], vec![0.0; self.critics[1].param_count()]];
        let mut loss = 0.0;
        for (g, l) in parts {
            for c in 0..2 {
                grads[c].iter_mut().zip(&g[c]).for_each(|(a, b)| *a += b);
            }
            loss += l;
        }
        let critic_loss = loss / (2.0 * n);
        if !critic_loss.is_finite() {
            return Err(AgentError::NonFiniteLoss {
                update: self.updates,
                detail: format!("critic loss {critic_loss}"),
            });
        }
        for c in 0..2 {
            let layout = self.critics[c].layout().clone();
            self.critic_opts[c].step(self.critics[c].params_mut(), &grads[c], &layout)?;
        }
        self.updates += 1;

        let mut actor_loss = None;
        if self.updates % self.config.policy_delay == 0 {
            if self.updates > self.config.actor_warmup {
                actor_loss = Some(self.actor_step(&batch)?);
            }
            let tau = self.config.tau;
            soft_update(self.actor_target.params_mut(), self.actor.params(), tau);
            for c in 0..2 {
                soft_update(self.critic_targets[c].params_mut(), self.critics[c].params(), tau);
            }
        }
        Ok(UpdateStats { critic_loss, actor_loss })
    }

    fn actor_step(&mut self, batch: &[&Transition]) -> Result<f64, AgentError> {
        let n = batch.len() as f64;
        let chunk = batch.len().div_ceil(GRAD_CHUNKS);
        let ranges: Vec<(usize, usize)> = (0..batch.len()).step_by(chunk).map(|s| (s, (s + chunk).min(batch.len()))).collect();
        let parts = par::map_slice(&ranges, |_, &(lo, hi)| {
            let mut g = vec![0.0; self.actor.param_count()];
            let mut scratch = vec![0.0; self.critics[0].param_count()];
            let mut loss = 0.0;
            for t in &batch[lo..hi] {
                let (out, cache) = self.actor.forward_cached(&t.state);
                let (q, qc) = self.critics[0].q_cached(&t.state, &out.action);
                loss -= q;
                let da = self.critics[0].backward(&qc, -1.0 / n, &mut scratch);
                self.actor.backward(&cache, &out, &da, &mut g);
            }
            (g, loss)
        });
        let mut grads = vec![0.0; self.actor.param_count()];
        let mut loss = 0.0;
        for (g, l) in parts {
            grads.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            loss += l;
        }
        let loss = loss / n;
        if !loss.is_finite() {
            return Err(AgentError::NonFiniteLoss {
                update: self.updates,
                detail: format!("actor loss {loss}"),
            });
        }
        let layout = self.actor.layout().clone();
        self.actor_opt.step(self.actor.params_mut(), &grads, &layout)?;
        self.actor_updates += 1;
        Ok(loss)
    }
}

/// The smaller of the two critic estimates.
pub fn twin_min(q1: f64, q2: f64) -> f64 {
    q1.min(q2)
}

/// Act with Gaussian noise of standard deviation `noise_scale` on the
/// continuous heads (in `[-1, 1]` units). Returns the command and the
/// critic-space action, whose maneuver part is the one-hot executed
/// maneuver.
pub fn act_with_exploration<R: Rng + ?Sized>(
    actor: &Actor,
    state: &[f64],
    noise_scale: f64,
    choice: ManeuverChoice,
    rng: &mut R,
) -> (ControlCommand, [f64; ACTION_DIM]) {
    let out: ActorOutput = actor.forward(state);
    let p = out.probs();
    let m = match choice {
        ManeuverChoice::Argmax => argmax3(&p),
        ManeuverChoice::Sample => {
            let u: f64 = rng.random();
            if u < p[0] {
                0
            } else if u < p[0] + p[1] {
                1
            } else {
                2
            }
        }
    };
    let mut a = [0.0; ACTION_DIM];
    a[m] = 1.0;
    for k in 3..ACTION_DIM {
        let noise = if noise_scale > 0.0 {
            Normal::new(0.0, noise_scale).expect("positive sigma").sample(rng)
        } else {
            0.0
        };
        a[k] = (out.action[k] + noise).clamp(-1.0, 1.0);
    }
    (decode(&a, m), a)
}
