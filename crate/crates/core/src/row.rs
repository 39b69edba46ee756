//! Absolute right-of-way regions and violation tracking.
//!
//! Every vehicle owns a road-frame rectangle ahead of it whose length is its
//! density-adjusted stopping distance and whose width is the vehicle width.
//! Another vehicle whose footprint intersects that rectangle violates the
//! owner's right of way.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{convex_intersection_area, Aabb, OrientedRect};
use crate::world::{ScenarioConfig, VehicleState};

/// Overlaps at or below this area (m²) are treated as grazing contact.
pub const EPS_AREA: f64 = 0.01;
/// Half-window, in meters, for the local density estimate.
pub const DENSITY_WINDOW: f64 = 50.0;

#[derive(Debug, Error, PartialEq)]
pub enum RowError {
    #[error("maximum deceleration must be positive, got {0}")]
    NonPositiveDeceleration(f64),
    #[error("{name} must be non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },
}

/// `L = v² / (2 a_max) · 1 / (1 + k_rho · rho)`.
pub fn stopping_distance(v: f64, a_max: f64, rho: f64, k_rho: f64) -> Result<f64, RowError> {
    if !(a_max > 0.0) {
        return Err(RowError::NonPositiveDeceleration(a_max));
    }
    for (name, value) in [("speed", v), ("rho", rho), ("k_rho", k_rho)] {
        if !(value >= 0.0) {
            return Err(RowError::Negative { name, value });
        }
    }
    Ok(v * v / (2.0 * a_max) / (1.0 + k_rho * rho))
}

/// Validated parameters of the right-of-way model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowParams {
    a_max: f64,
    k_rho: f64,
}

impl RowParams {
    pub fn new(a_max: f64, k_rho: f64) -> Result<Self, RowError> {
        stopping_distance(0.0, a_max, 0.0, k_rho)?;
        Ok(Self { a_max, k_rho })
    }

    pub fn from_scenario(cfg: &ScenarioConfig) -> Result<Self, RowError> {
        Self::new(cfg.a_max, cfg.k_rho)
    }

    pub fn a_max(&self) -> f64 {
        self.a_max
    }

    pub fn k_rho(&self) -> f64 {
        self.k_rho
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ARowRegion {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub owner_id: u32,
}

impl ARowRegion {
    pub fn as_aabb(&self) -> Aabb {
        Aabb {
            x_min: self.x_min,
            x_max: self.x_max,
            y_min: self.y_min,
            y_max: self.y_max,
        }
    }

    pub fn area(&self) -> f64 {
        self.as_aabb().area()
    }
}

/// Right-of-way rectangle of `state`. The lateral extent does not rotate with
/// heading; a backward-pointing heading collapses the region to zero length.
pub fn a_row(state: &VehicleState, rho: f64, params: RowParams) -> ARowRegion {
    let l = stopping_distance(state.speed(), params.a_max, rho.max(0.0), params.k_rho)
        .expect("RowParams are validated at construction");
    let reach = l * state.heading.cos();
    ARowRegion {
        x_min: state.x,
        x_max: state.x + reach.max(0.0),
        y_min: state.y - 0.5 * state.width,
        y_max: state.y + 0.5 * state.width,
        owner_id: state.id,
    }
}

/// Vehicles per 100 m in the owner's lane within `DENSITY_WINDOW` meters,
/// owner excluded.
pub fn local_density(vehicles: &[VehicleState], owner: usize, cfg: &ScenarioConfig) -> f64 {
    let me = &vehicles[owner];
    let count = vehicles
        .iter()
        .enumerate()
        .filter(|(j, v)| {
            *j != owner && v.lane_index == me.lane_index && cfg.ring_dx(me.x, v.x).abs() <= DENSITY_WINDOW
        })
        .count();
    count as f64 * 100.0 / (2.0 * DENSITY_WINDOW)
}

/// Exact area of `footprint ∩ region`.
pub fn overlap_area(footprint: &OrientedRect, region: &ARowRegion) -> f64 {
    if region.area() <= 0.0 || !footprint.bounds().intersects(&region.as_aabb()) {
        return 0.0;
    }
    convex_intersection_area(&footprint.corners(), &region.as_aabb().corners())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowViolationEvent {
    pub violator_id: u32,
    pub victim_id: u32,
    pub tick: usize,
    /// Tick at which this continuous intersection began.
    pub onset_tick: usize,
    pub overlap_area: f64,
    pub duration_so_far: f64,
}

/// Signed change of one pair's overlap area between consecutive ticks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OverlapChange {
    pub violator_id: u32,
    pub victim_id: u32,
    pub delta_area: f64,
    /// Seconds since the intersection was first detected.
    pub elapsed: f64,
}

/// Which pairs to examine.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairScope {
    All,
    /// Only pairs in which this vehicle is violator or victim.
    Involving(u32),
}

/// Instantaneous intersections `(violator index, victim index, area)` above
/// `EPS_AREA`, ordered by (victim, violator) index.
pub fn instantaneous_violations(
    vehicles: &[VehicleState],
    cfg: &ScenarioConfig,
    params: RowParams,
    scope: PairScope,
) -> Vec<(usize, usize, f64)> {
    let focus = match scope {
        PairScope::All => None,
        PairScope::Involving(id) => vehicles.iter().position(|v| v.id == id),
    };
    if matches!(scope, PairScope::Involving(_)) && focus.is_none() {
        return Vec::new();
    }
    let max_len = vehicles.iter().map(|v| v.length.hypot(v.width)).fold(0.0, f64::max);
    let mut out = Vec::new();
    for (victim, owner) in vehicles.iter().enumerate() {
        // Cheap reach bound before computing the density.
        let reach_bound = owner.speed().powi(2) / (2.0 * params.a_max);
        let candidates: Vec<usize> = match focus {
            Some(f) if f != victim => vec![f],
            _ => (0..vehicles.len()).filter(|&j| j != victim).collect(),
        };
        let mut region = None;
        for violator in candidates {
            let other = &vehicles[violator];
            let dx = cfg.ring_dx(owner.x, other.x);
            if dx < -max_len || dx > reach_bound + max_len {
                continue;
            }
            if (other.y - owner.y).abs() > 0.5 * owner.width + max_len {
                continue;
            }
            let region = *region.get_or_insert_with(|| a_row(owner, local_density(vehicles, victim, cfg), params));
            let fp = other.footprint_shifted(owner.x + dx - other.x);
            let area = overlap_area(&fp, &region);
            if area > EPS_AREA {
                out.push((violator, victim, area));
            }
        }
    }
    out
}

/// Turns per-tick intersections into events with persistent durations.
#[derive(Clone, Debug, Default)]
pub struct ViolationTracker {
    active: BTreeMap<(u32, u32), ActivePair>,
}

#[derive(Clone, Copy, Debug)]
struct ActivePair {
    onset_tick: usize,
    area: f64,
}

impl ViolationTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Detect violations at `tick`. A pair intersecting on consecutive ticks
    /// keeps its onset and accumulates duration.
    pub fn detect(
        &mut self,
        vehicles: &[VehicleState],
        tick: usize,
        cfg: &ScenarioConfig,
        params: RowParams,
        scope: PairScope,
    ) -> (Vec<RowViolationEvent>, Vec<OverlapChange>) {
        let now = instantaneous_violations(vehicles, cfg, params, scope);
        let mut next = BTreeMap::new();
        let mut events = Vec::with_capacity(now.len());
        let mut changes = Vec::new();
        for (violator, victim, area) in now {
            let key = (vehicles[violator].id, vehicles[victim].id);
            let (onset_tick, prev_area) = match self.active.get(&key) {
                Some(p) if p.onset_tick < tick => (p.onset_tick, p.area),
                _ => (tick, 0.0),
            };
            let duration = (tick - onset_tick) as f64 * cfg.tick;
            events.push(RowViolationEvent {
                violator_id: key.0,
                victim_id: key.1,
                tick,
                onset_tick,
                overlap_area: area,
                duration_so_far: duration,
            });
            changes.push(OverlapChange {
                violator_id: key.0,
                victim_id: key.1,
                delta_area: area - prev_area,
                elapsed: duration,
            });
            next.insert(key, ActivePair { onset_tick, area });
        }
        // Pairs that just separated release their overlap.
        for (key, p) in &self.active {
            if !next.contains_key(key) {
                changes.push(OverlapChange {
                    violator_id: key.0,
                    victim_id: key.1,
                    delta_area: -p.area,
                    elapsed: (tick - p.onset_tick) as f64 * cfg.tick,
                });
            }
        }
        self.active = next;
        (events, changes)
    }
}

/// All current violations in `vehicles` as fresh events at `tick`.
pub fn detect_violations(
    vehicles: &[VehicleState],
    tick: usize,
    cfg: &ScenarioConfig,
    params: RowParams,
) -> Vec<RowViolationEvent> {
    ViolationTracker::new().detect(vehicles, tick, cfg, params, PairScope::All).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn car(id: u32, x: f64, y: f64, v: f64) -> VehicleState {
        VehicleState {
            id,
            x,
            y,
            v_x: v,
            v_y: 0.0,
            a_x: 0.0,
            a_y: 0.0,
            heading: 0.0,
            lane_index: 0,
            width: 2.0,
            length: 4.0,
        }
    }

    fn params() -> RowParams {
        RowParams::new(5.0, 0.5).unwrap()
    }

    #[test]
    fn stopping_distance_examples() {
        assert_eq!(stopping_distance(0.0, 5.0, 0.0, 0.5).unwrap(), 0.0);
        assert_eq!(stopping_distance(10.0, 5.0, 0.0, 0.5).unwrap(), 10.0);
        assert_eq!(stopping_distance(10.0, 5.0, 1.0, 1.0).unwrap(), 5.0);
        assert_eq!(
            stopping_distance(10.0, 0.0, 0.0, 0.5),
            Err(RowError::NonPositiveDeceleration(0.0))
        );
        assert!(stopping_distance(-1.0, 5.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn doubling_speed_quadruples_length() {
        for v in [0.5, 3.0, 11.0, 27.0] {
            let l1 = stopping_distance(v, 4.0, 0.0, 0.5).unwrap();
            let l2 = stopping_distance(2.0 * v, 4.0, 0.0, 0.5).unwrap();
            assert!((l2 - 4.0 * l1).abs() <= 1e-12 * l2);
        }
    }

    #[test]
    fn region_bounds() {
        let r = a_row(&car(7, 0.0, 0.0, 10.0), 0.0, params());
        assert_eq!((r.x_min, r.x_max, r.y_min, r.y_max, r.owner_id), (0.0, 10.0, -1.0, 1.0, 7));

        let stopped = a_row(&car(1, 3.0, 0.0, 0.0), 0.0, params());
        assert_eq!(stopped.x_min, stopped.x_max);
        assert_eq!(stopped.area(), 0.0);

        let mut sideways = car(2, 3.0, 0.0, 10.0);
        sideways.heading = FRAC_PI_2;
        let r = a_row(&sideways, 0.0, params());
        assert!((r.x_max - r.x_min).abs() < 1e-12);

        let mut backwards = car(3, 3.0, 0.0, 10.0);
        backwards.heading = 3.0;
        let r = a_row(&backwards, 0.0, params());
        assert_eq!(r.x_max, r.x_min);
        assert_eq!(r.y_max - r.y_min, backwards.width);
    }

    #[test]
    fn overlap_area_examples() {
        let region = ARowRegion {
            x_min: 0.0,
            x_max: 10.0,
            y_min: -2.0,
            y_max: 2.0,
            owner_id: 0,
        };
        assert_eq!(overlap_area(&OrientedRect::new(20.0, 0.0, 2.0, 2.0, 0.0), &region), 0.0);
        assert!((overlap_area(&OrientedRect::new(5.0, 0.0, 2.0, 2.0, 0.0), &region) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn vehicle_ahead_inside_corridor_is_one_event() {
        let cfg = ScenarioConfig::default();
        // Victim at x=0 doing 10 m/s has a 10 m corridor at rho=0; the ego's
        // rear bumper sits 1 m ahead of the victim's front bumper.
        let victim = car(1, 0.0, 1.75, 10.0);
        let ego = car(0, 5.0, 1.75, 10.0);
        let p = RowParams::new(5.0, 0.0).unwrap();
        let ev = detect_violations(&[ego, victim], 3, &cfg, p);
        assert_eq!(ev.len(), 1);
        assert_eq!((ev[0].violator_id, ev[0].victim_id), (0, 1));
        // Footprint [3, 7] × [0.75, 2.75] against corridor [0, 10] × [0.75, 2.75].
        assert!((ev[0].overlap_area - 8.0).abs() < 1e-12);
    }

    #[test]
    fn lone_vehicle_has_no_violations() {
        let cfg = ScenarioConfig::default();
        assert!(detect_violations(&[car(0, 0.0, 1.75, 20.0)], 0, &cfg, params()).is_empty());
    }

    #[test]
    fn continuing_overlap_extends_duration() {
        let cfg = ScenarioConfig::default();
        let p = RowParams::new(5.0, 0.0).unwrap();
        let mut tr = ViolationTracker::new();
        let w = [car(0, 5.0, 1.75, 10.0), car(1, 0.0, 1.75, 10.0)];
        let (e0, _) = tr.detect(&w, 0, &cfg, p, PairScope::All);
        let (e1, c1) = tr.detect(&w, 1, &cfg, p, PairScope::All);
        assert_eq!(e0.len(), 1);
        assert_eq!(e1[0].onset_tick, 0);
        assert!((e1[0].duration_so_far - cfg.tick).abs() < 1e-15);
        assert_eq!(c1[0].delta_area, 0.0);
        // Separation releases the overlap.
        let apart = [car(0, 100.0, 1.75, 10.0), car(1, 0.0, 1.75, 10.0)];
        let (e2, c2) = tr.detect(&apart, 2, &cfg, p, PairScope::All);
        assert!(e2.is_empty());
        assert_eq!(c2.len(), 1);
        assert!((c2[0].delta_area + 8.0).abs() < 1e-12);
    }

    #[test]
    fn violation_across_the_ring_seam() {
        let cfg = ScenarioConfig::default();
        let p = RowParams::new(5.0, 0.0).unwrap();
        let victim = car(1, 998.0, 1.75, 10.0);
        let ego = car(0, 3.0, 1.75, 10.0);
        let ev = detect_violations(&[ego, victim], 0, &cfg, p);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].victim_id, 1);
    }

    #[test]
    fn spaced_platoon_has_no_violations() {
        let cfg = ScenarioConfig::default();
        let p = params();
        // 15 m/s gives L = 22.5 m at rho = 0; use 40 m spacing.
        let w: Vec<VehicleState> = (0..10).map(|i| car(i, 40.0 * i as f64, 1.75, 15.0)).collect();
        assert!(detect_violations(&w, 0, &cfg, p).is_empty());
    }

    #[test]
    fn scoped_detection_matches_full_scan() {
        let cfg = ScenarioConfig::default();
        let p = params();
        let w: Vec<VehicleState> = (0..8).map(|i| car(i, 7.0 * i as f64, 1.75 + 0.4 * (i % 2) as f64, 12.0)).collect();
        let all = instantaneous_violations(&w, &cfg, p, PairScope::All);
        let scoped = instantaneous_violations(&w, &cfg, p, PairScope::Involving(3));
        let expected: Vec<_> = all.iter().filter(|(a, b, _)| *a == 3 || *b == 3).cloned().collect();
        assert_eq!(scoped, expected);
    }

    #[test]
    fn larger_density_never_enlarges_region() {
        let s = car(0, 0.0, 0.0, 13.0);
        let mut last = f64::INFINITY;
        for k in 0..50 {
            let r = a_row(&s, k as f64 * 0.3, params());
            assert!(r.area() <= last);
            last = r.area();
        }
    }
}
