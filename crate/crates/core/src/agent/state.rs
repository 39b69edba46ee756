//! Fixed-width policy input built from the ego and its nearest neighbors.

use crate::world::{NeighborSet, ScenarioConfig, VehicleState, LANE_WIDTH, NEIGHBOR_CAP};

pub const EGO_FEATURES: usize = 6;
pub const NEIGHBOR_FEATURES: usize = 6;
pub const INTENT_FEATURES: usize = 3;
/// `6 + 9·NEIGHBOR_CAP`.
pub const STATE_DIM: usize = EGO_FEATURES + (NEIGHBOR_FEATURES + INTENT_FEATURES) * NEIGHBOR_CAP;

const DX_SCALE: f64 = 50.0;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector(pub Vec<f64>);

impl StateVector {
    /// Encode a neighbor set. Absent neighbors and missing intentions stay
    /// zero; `use_intentions = false` zeroes every intention slot.
    pub fn encode(set: &NeighborSet, cfg: &ScenarioConfig, use_intentions: bool) -> Self {
        let mut s = vec![0.0; STATE_DIM];
        s[..EGO_FEATURES].copy_from_slice(&ego_features(&set.ego, cfg));
        for (k, nb) in set.neighbors.iter().take(NEIGHBOR_CAP).enumerate() {
            let base = EGO_FEATURES + k * NEIGHBOR_FEATURES;
            let v = &nb.state;
            s[base] = cfg.ring_dx(set.ego.x, v.x) / DX_SCALE;
            s[base + 1] = (v.y - set.ego.y) / LANE_WIDTH;
            s[base + 2] = (v.v_x - set.ego.v_x) / 10.0;
            s[base + 3] = v.v_y / 2.0;
            s[base + 4] = v.a_x / 3.0;
            s[base + 5] = 1.0;
            if use_intentions {
                if let Some(label) = nb.intention {
                    let at = intention_offset(k);
                    s[at..at + INTENT_FEATURES].copy_from_slice(&label.one_hot());
                }
            }
        }
        Self(s)
    }

    /// Values of the intention block for neighbor slot `k`.
    pub fn intention_slot(&self, k: usize) -> &[f64] {
        let at = intention_offset(k);
        &self.0[at..at + INTENT_FEATURES]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn intention_offset(k: usize) -> usize {
    EGO_FEATURES + NEIGHBOR_FEATURES * NEIGHBOR_CAP + INTENT_FEATURES * k
}

/// Speed, lateral speed, acceleration, heading, lane position and offset
/// from the lane center.
fn ego_features(v: &VehicleState, cfg: &ScenarioConfig) -> [f64; EGO_FEATURES] {
    let lanes = cfg.lane_count.max(2) as f64 - 1.0;
    [
        v.v_x / 15.0,
        v.v_y / 2.0,
        v.a_x / 3.0,
        v.heading / 0.5,
        2.0 * v.lane_index as f64 / lanes - 1.0,
        (v.y - cfg.lane_center(v.lane_index)) / (0.5 * LANE_WIDTH),
    ]
}
