//! Hierarchical driving command: a discrete maneuver plus continuous
//! heading and acceleration parameters.

use serde::{Deserialize, Serialize};

pub const HEADING_BOUND: f64 = 0.5;
pub const ACCEL_BOUND: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Maneuver {
    LeftChange,
    Keep,
    RightChange,
}

impl Maneuver {
    pub const ALL: [Maneuver; 3] = [Maneuver::LeftChange, Maneuver::Keep, Maneuver::RightChange];

    pub fn index(self) -> usize {
        match self {
            Maneuver::LeftChange => 0,
            Maneuver::Keep => 1,
            Maneuver::RightChange => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    pub maneuver: Maneuver,
    /// Radians, within `±HEADING_BOUND`.
    pub heading: f64,
    /// m/s², within `±ACCEL_BOUND`; positive accelerates, negative brakes.
    pub accel: f64,
}

impl Default for ControlCommand {
    fn default() -> Self {
        Self::keep(0.0)
    }
}

impl ControlCommand {
    pub fn keep(accel: f64) -> Self {
        Self {
            maneuver: Maneuver::Keep,
            heading: 0.0,
            accel,
        }
    }

    pub fn in_bounds(&self) -> bool {
        self.heading.abs() <= HEADING_BOUND && self.accel.abs() <= ACCEL_BOUND
    }

    /// The command with both continuous parts clamped to their bounds, and
    /// whether anything changed. Non-finite values become zero.
    pub fn clamped(&self) -> (Self, bool) {
        let fix = |v: f64, b: f64| if v.is_finite() { v.clamp(-b, b) } else { 0.0 };
        let out = Self {
            maneuver: self.maneuver,
            heading: fix(self.heading, HEADING_BOUND),
            accel: fix(self.accel, ACCEL_BOUND),
        };
        let changed = out.heading.to_bits() != self.heading.to_bits() || out.accel.to_bits() != self.accel.to_bits();
        (out, changed)
    }
}
