//! One-dimensional speed-holding task with a closed-form optimum.
//!
//! The state is the speed error `e`; acceleration `u ∈ [-5, 5]` changes it
//! by `u·dt` per step and every step pays `1 − |e|/scale`. Driving the error
//! to zero at full authority is optimal, which gives the optimal return in
//! closed form.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::nets::Actor;
use super::replay::{ReplayBuffer, Transition};
use super::td3::{act_with_exploration, ManeuverChoice, Td3, Td3Config};
use super::{AgentError, ACCEL_BOUND};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpeedHoldTask {
    pub dt: f64,
    pub horizon: usize,
    /// Initial errors are drawn from `±max_error`.
    pub max_error: f64,
    pub scale: f64,
}

impl Default for SpeedHoldTask {
    fn default() -> Self {
        Self {
            dt: 0.1,
            horizon: 50,
            max_error: 5.0,
            scale: 5.0,
        }
    }
}

impl SpeedHoldTask {
    pub fn state(&self, e: f64) -> [f64; 1] {
        [e / self.max_error]
    }

    /// Next error and reward.
    pub fn step(&self, e: f64, accel: f64) -> (f64, f64) {
        let e = e + accel.clamp(-ACCEL_BOUND, ACCEL_BOUND) * self.dt;
        (e, 1.0 - e.abs() / self.scale)
    }

    pub fn optimal_return(&self, e0: f64) -> f64 {
        let per_step = ACCEL_BOUND * self.dt;
        (1..=self.horizon)
            .map(|k| 1.0 - (e0.abs() - per_step * k as f64).max(0.0) / self.scale)
            .sum()
    }

    /// Undiscounted return of the greedy actor from `e0`.
    pub fn rollout(&self, actor: &Actor, e0: f64) -> f64 {
        let mut e = e0;
        let mut total = 0.0;
        for _ in 0..self.horizon {
            let cmd = actor.forward(&self.state(e)).command();
            let (ne, r) = self.step(e, cmd.accel);
            total += r;
            e = ne;
        }
        total
    }

    /// Evenly spaced evaluation starts.
    pub fn eval_starts(&self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|k| -self.max_error + 2.0 * self.max_error * k as f64 / (n - 1) as f64)
            .collect()
    }

    /// Mean greedy return over `starts` divided by the mean optimal return.
    pub fn optimality_ratio(&self, actor: &Actor, starts: &[f64]) -> f64 {
        let got: f64 = starts.iter().map(|&e| self.rollout(actor, e)).sum();
        let best: f64 = starts.iter().map(|&e| self.optimal_return(e)).sum();
        got / best
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyRun {
    /// `(updates, optimality ratio)` at each evaluation point.
    pub evaluations: Vec<(usize, f64)>,
    pub actor: Actor,
}

impl ToyRun {
    pub fn best_ratio(&self) -> f64 {
        self.evaluations.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Train on the toy task for `max_updates` learner updates, evaluating the
/// greedy actor every `eval_every` updates.
pub fn train_speed_hold(
    task: &SpeedHoldTask,
    config: Td3Config,
    max_updates: usize,
    eval_every: usize,
    seed: u64,
) -> Result<ToyRun, AgentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut td3 = Td3::new(1, config, &mut rng)?;
    let mut buffer = ReplayBuffer::new(td3.config.buffer_capacity);
    let warmup = td3.config.batch_size;
    let starts = task.eval_starts(21);
    let mut evaluations = Vec::new();
    while td3.updates() < max_updates {
        let mut e = rng.random_range(-task.max_error..task.max_error);
        for _ in 0..task.horizon {
            let s = task.state(e);
            let (cmd, a) = act_with_exploration(&td3.actor, &s, 0.2, ManeuverChoice::Sample, &mut rng);
            let (ne, r) = task.step(e, cmd.accel);
            buffer.push(Transition {
                state: s.to_vec(),
                action: a,
                reward: r,
                next_state: task.state(ne).to_vec(),
                // The horizon is a time limit, not a terminal state.
                done: false,
            });
            e = ne;
            if buffer.len() >= warmup && td3.updates() < max_updates {
                td3.update(&buffer, &mut rng)?;
                if td3.updates() % eval_every == 0 {
                    evaluations.push((td3.updates(), task.optimality_ratio(&td3.actor, &starts)));
                }
            }
        }
    }
    Ok(ToyRun {
        evaluations,
        actor: td3.actor,
    })
}
