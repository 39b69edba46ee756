//! Intelligent driver model and MOBIL-style lane-change incentive.

use serde::{Deserialize, Serialize};

/// Braking never exceeds this magnitude, in m/s².
pub const EMERGENCY_DECEL: f64 = 9.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdmParams {
    pub desired_speed: f64,
    pub time_headway: f64,
    pub min_gap: f64,
    pub max_accel: f64,
    pub comfortable_decel: f64,
}

impl IdmParams {
    pub fn is_valid(&self) -> bool {
        [
            self.desired_speed,
            self.time_headway,
            self.min_gap,
            self.max_accel,
            self.comfortable_decel,
        ]
        .iter()
        .all(|v| *v > 0.0 && v.is_finite())
    }

    /// Desired dynamic gap `s*`.
    pub fn desired_gap(&self, v: f64, closing: f64) -> f64 {
        let dyn_part = v * self.time_headway + v * closing / (2.0 * (self.max_accel * self.comfortable_decel).sqrt());
        self.min_gap + dyn_part.max(0.0)
    }

    /// Raw IDM acceleration, unclamped. `leader` is `(gap, leader_speed)`.
    pub fn raw_accel(&self, v: f64, leader: Option<(f64, f64)>) -> f64 {
        let free = 1.0 - (v / self.desired_speed).powi(4);
        match leader {
            None => self.max_accel * free,
            Some((gap, v_lead)) => {
                let s_star = self.desired_gap(v, v - v_lead);
                let s = gap.max(1e-3);
                self.max_accel * (free - (s_star / s).powi(2))
            }
        }
    }

    /// IDM acceleration clamped to `[-EMERGENCY_DECEL, max_accel]`.
    pub fn accel(&self, v: f64, leader: Option<(f64, f64)>) -> f64 {
        self.raw_accel(v, leader).clamp(-EMERGENCY_DECEL, self.max_accel)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaneChangeRule {
    pub politeness: f64,
    /// Minimum net acceleration gain, m/s².
    pub threshold: f64,
    /// Deceleration the new follower may be forced into, m/s².
    pub safe_decel: f64,
}

impl Default for LaneChangeRule {
    fn default() -> Self {
        Self {
            politeness: 0.3,
            threshold: 0.2,
            safe_decel: 4.0,
        }
    }
}

/// Accelerations before (`a`) and after (`a_new`) a hypothetical change.
#[derive(Clone, Copy, Debug)]
pub struct MobilInputs {
    pub me: f64,
    pub me_new: f64,
    pub new_follower: f64,
    pub new_follower_new: f64,
    pub old_follower: f64,
    pub old_follower_new: f64,
}

impl LaneChangeRule {
    /// Net incentive, or `None` when the move forces the new follower to
    /// brake harder than `safe_decel`.
    pub fn incentive(&self, m: &MobilInputs) -> Option<f64> {
        if m.new_follower_new < -self.safe_decel {
            return None;
        }
        let others = (m.new_follower_new - m.new_follower) + (m.old_follower_new - m.old_follower);
        Some(m.me_new - m.me + self.politeness * others)
    }
}
