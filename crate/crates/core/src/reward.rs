//! Per-tick reward terms, the social-compliance (SCE) score and the
//! scalar episode fitness.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::row::OverlapChange;
use crate::sim::SimEvent;
use crate::world::{EpisodeLog, Outcome, VehicleState, EGO_ID};

/// Below this time-to-collision the safety penalty ramps in, seconds.
pub const TTC_THRESHOLD: f64 = 3.5;
/// Leaders further than this are ignored for TTC, meters.
pub const TTC_RANGE: f64 = 100.0;
pub const SAFE_ARRIVED_REWARD: f64 = 100.0;
pub const COLLISION_REWARD: f64 = -60.0;
pub const WRONG_LANE_REWARD: f64 = -40.0;
/// Trailing window, in ticks, for the per-tick speed term.
pub const SPEED_WINDOW: usize = 10;
/// Closing speed at which a collision zeroes the safety score, m/s.
pub const SEVERE_CLOSING_SPEED: f64 = 15.0;
/// Mean jerk that zeroes the comfort score, m/s³.
pub const COMFORT_JERK_SCALE: f64 = 10.0;

#[derive(Debug, Error, PartialEq)]
pub enum RewardError {
    #[error("speed history needs at least 2 samples, got {0}")]
    DegenerateHistory(usize),
    #[error("acceleration samples share the timestamp {0}")]
    ZeroInterval(f64),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub w_v: f64,
    pub w_c: f64,
    pub w_s: f64,
    pub w_d: f64,
    /// Decay rate of the right-of-way term, 1/s.
    pub beta: f64,
    pub v_ref: f64,
    /// Mixing weights of `[r_v, r_c, r_s, r_d, r_t]` in the total.
    pub sce_mix: [f64; 5],
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            w_v: 0.1,
            w_c: 0.02,
            w_s: 1.0,
            w_d: 0.5,
            beta: 0.5,
            v_ref: 15.0,
            sce_mix: [0.2; 5],
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<(), RewardError> {
        let scalars = [self.w_v, self.w_c, self.w_s, self.w_d, self.beta, self.v_ref];
        if scalars.iter().chain(&self.sce_mix).any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(RewardError::InvalidWeights("reward weights must be finite and non-negative".into()));
        }
        let sum: f64 = self.sce_mix.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(RewardError::InvalidWeights(format!("sce_mix sums to {sum}, expected 1")));
        }
        Ok(())
    }
}

/// Weights of Safety, Efficiency, Comfort and SCE in the fitness. Always
/// non-negative and summing to one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct FitnessWeights([f64; 4]);

impl FitnessWeights {
    pub fn new(w1: f64, w2: f64, w3: f64, w4: f64) -> Result<Self, RewardError> {
        let w = [w1, w2, w3, w4];
        if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(RewardError::InvalidWeights(format!("fitness weights {w:?} must be non-negative")));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(RewardError::InvalidWeights(format!("fitness weights sum to {sum}, expected 1")));
        }
        Ok(Self(w))
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.0
    }
}

impl Default for FitnessWeights {
    fn default() -> Self {
        Self([0.25; 4])
    }
}

impl TryFrom<[f64; 4]> for FitnessWeights {
    type Error = RewardError;
    fn try_from(w: [f64; 4]) -> Result<Self, RewardError> {
        Self::new(w[0], w[1], w[2], w[3])
    }
}

impl From<FitnessWeights> for [f64; 4] {
    fn from(w: FitnessWeights) -> Self {
        w.0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_v: f64,
    pub r_c: f64,
    pub r_s: f64,
    pub r_d: f64,
    pub r_t: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn mixed(r_v: f64, r_c: f64, r_s: f64, r_d: f64, r_t: f64, mix: &[f64; 5]) -> Self {
        let total = mix[0] * r_v + mix[1] * r_c + mix[2] * r_s + mix[3] * r_d + mix[4] * r_t;
        Self {
            r_v,
            r_c,
            r_s,
            r_d,
            r_t,
            total,
        }
    }
}

/// Time-weighted mean absolute speed deviation, negated:
/// `-w_v · Σ t·|v_t - v_ref| / Σ t` with `t` the sample index.
pub fn try_speed_reward(history: &[f64], v_ref: f64, w_v: f64) -> Result<f64, RewardError> {
    if history.len() < 2 {
        return Err(RewardError::DegenerateHistory(history.len()));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (t, v) in history.iter().enumerate() {
        num += t as f64 * (v - v_ref).abs();
        den += t as f64;
    }
    Ok(-w_v * num / den)
}

/// As [`try_speed_reward`], but a history shorter than two samples yields 0.
pub fn speed_reward(history: &[f64], v_ref: f64, w_v: f64) -> f64 {
    try_speed_reward(history, v_ref, w_v).unwrap_or(0.0)
}

pub fn comfort_reward(a_t: f64, a_prev: f64, t: f64, t_prev: f64, w_c: f64) -> Result<f64, RewardError> {
    let dt = t - t_prev;
    if dt == 0.0 {
        return Err(RewardError::ZeroInterval(t));
    }
    Ok(-w_c * (a_t - a_prev).abs() / dt.abs())
}

/// Linear penalty ramp below `TTC_THRESHOLD`. NaN and +∞ mean no threat.
pub fn safety_reward(ttc: f64, w_s: f64) -> f64 {
    if ttc.is_nan() {
        return 0.0;
    }
    -w_s * ((TTC_THRESHOLD - ttc.max(0.0)) / TTC_THRESHOLD).max(0.0)
}

/// `1 + e^{-βT}`.
pub fn decay_factor(beta: f64, elapsed: f64) -> f64 {
    1.0 + (-beta * elapsed).exp()
}

pub fn row_reward(delta_overlap: f64, elapsed: f64, w_d: f64, beta: f64) -> f64 {
    -w_d * delta_overlap * decay_factor(beta, elapsed)
}

/// Terminal bonus or penalty; `None` and `Timeout` are non-terminal.
pub fn terminal_reward(outcome: Option<Outcome>) -> f64 {
    match outcome {
        Some(Outcome::SafeArrived) => SAFE_ARRIVED_REWARD,
        Some(Outcome::Collision) => COLLISION_REWARD,
        Some(Outcome::WrongLane) => WRONG_LANE_REWARD,
        Some(Outcome::Timeout) | None => 0.0,
    }
}

/// Time to collision with a leader at bumper gap `gap`; +∞ when not closing.
pub fn time_to_collision(gap: f64, v_follower: f64, v_leader: f64) -> f64 {
    let closing = v_follower - v_leader;
    if gap <= 0.0 {
        return 0.0;
    }
    if closing <= 0.0 {
        return f64::INFINITY;
    }
    gap / closing
}

/// Incremental per-tick reward for the ego vehicle.
#[derive(Clone, Debug)]
pub struct RewardTracker {
    weights: RewardWeights,
    speeds: VecDeque<f64>,
    prev_accel: Option<(f64, f64)>,
}

impl RewardTracker {
    pub fn new(weights: RewardWeights) -> Self {
        Self {
            weights,
            speeds: VecDeque::with_capacity(SPEED_WINDOW),
            prev_accel: None,
        }
    }

    pub fn weights(&self) -> &RewardWeights {
        &self.weights
    }

    /// Reward for the tick ending at time `t`. `changes` are the ego's
    /// right-of-way overlap changes as violator.
    pub fn step(
        &mut self,
        ego: &VehicleState,
        t: f64,
        ttc: f64,
        changes: &[OverlapChange],
        outcome: Option<Outcome>,
    ) -> RewardBreakdown {
        let w = &self.weights;
        if self.speeds.len() == SPEED_WINDOW {
            self.speeds.pop_front();
        }
        self.speeds.push_back(ego.speed());
        let hist: Vec<f64> = self.speeds.iter().copied().collect();
        let r_v = speed_reward(&hist, w.v_ref, w.w_v);
        let r_c = match self.prev_accel {
            Some((a_prev, t_prev)) => comfort_reward(ego.a_x, a_prev, t, t_prev, w.w_c).unwrap_or(0.0),
            None => 0.0,
        };
        self.prev_accel = Some((ego.a_x, t));
        let r_s = safety_reward(ttc, w.w_s);
        let r_d = changes
            .iter()
            .filter(|c| c.violator_id == ego.id)
            .map(|c| row_reward(c.delta_area, c.elapsed, w.w_d, w.beta))
            .sum();
        let r_t = terminal_reward(outcome);
        RewardBreakdown::mixed(r_v, r_c, r_s, r_d, r_t, &w.sce_mix)
    }
}

/// The four normalized fitness components and their weighted sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitnessScore {
    pub safety: f64,
    pub efficiency: f64,
    pub comfort: f64,
    pub sce: f64,
    pub total: f64,
}

impl FitnessScore {
    pub fn combine(safety: f64, efficiency: f64, comfort: f64, sce: f64, fw: &FitnessWeights) -> Self {
        let w = fw.as_array();
        Self {
            safety,
            efficiency,
            comfort,
            sce,
            total: w[0] * safety + w[1] * efficiency + w[2] * comfort + w[3] * sce,
        }
    }
}

/// Relative speed of the ego and the vehicle it hit on the collision tick.
pub fn collision_closing_speed(log: &EpisodeLog) -> Option<f64> {
    log.ticks.iter().rev().find_map(|rec| {
        let other = rec.events.iter().find_map(|e| match *e {
            SimEvent::Collision { a, b } if a == EGO_ID => Some(b),
            SimEvent::Collision { a, b } if b == EGO_ID => Some(a),
            _ => None,
        })?;
        let ego = rec.ego()?;
        match rec.vehicles.iter().find(|v| v.id == other) {
            Some(o) => Some((ego.v_x - o.v_x).hypot(ego.v_y - o.v_y)),
            None => Some(ego.speed()),
        }
    })
}

/// Multi-objective episode fitness in `[0, 1]`.
///
/// Efficiency averages speed over the full scheduled horizon, so an episode
/// that ends early earns nothing for the remaining ticks.
pub fn fitness(log: &EpisodeLog, fw: &FitnessWeights, v_ref: f64) -> FitnessScore {
    let safety = match log.outcome {
        Outcome::Collision => {
            let closing = collision_closing_speed(log).unwrap_or(SEVERE_CLOSING_SPEED);
            (1.0 - closing / SEVERE_CLOSING_SPEED).max(0.0)
        }
        _ => 1.0,
    };
    let horizon = log.scenario.max_ticks.max(log.ticks.len()).max(1) as f64;
    let dt = log.scenario.tick;
    let speeds: Vec<f64> = log.ego_series().map(|v| v.speed()).collect();
    let efficiency = if v_ref > 0.0 {
        (speeds.iter().sum::<f64>() / horizon / v_ref).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let accels: Vec<f64> = log.ego_series().map(|v| v.a_x).collect();
    let jerk = if accels.len() >= 2 {
        accels.windows(2).map(|p| (p[1] - p[0]).abs() / dt).sum::<f64>() / (accels.len() - 1) as f64
    } else {
        0.0
    };
    let comfort = (1.0 - jerk / COMFORT_JERK_SCALE).clamp(0.0, 1.0);
    let sce = if log.ticks.is_empty() {
        0.0
    } else {
        let mean = log.ticks.iter().map(|t| t.reward.total).sum::<f64>() / log.ticks.len() as f64;
        mean.exp().clamp(0.0, 1.0)
    };
    FitnessScore::combine(safety, efficiency, comfort, sce, fw)
}
