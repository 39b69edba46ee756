//! Fixed-step point-mass world on a multi-lane ring road.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::idm::{IdmParams, LaneChangeRule, MobilInputs};
use crate::agent::{ControlCommand, Maneuver};
use crate::geometry::rects_overlap;
use crate::world::{build_scenario, IntentLabel, ScenarioConfig, VehicleState, WorldError, LANE_WIDTH};

/// Duration of the lateral lane-change spline, seconds.
pub const LANE_CHANGE_DURATION: f64 = 2.0;
/// Time between an NPC committing to a lane change and lateral motion.
pub const NPC_PREP_TIME: f64 = 1.0;
/// NPCs stay in lane at least this long after a completed change.
pub const NPC_COOLDOWN: f64 = 3.0;
/// NPCs re-evaluate lane changes every this many ticks (staggered by id).
pub const NPC_DECISION_PERIOD: usize = 5;
/// Lateral re-centering gain for the ego outside of lane changes, 1/s.
pub const EGO_CENTERING_GAIN: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SimEvent {
    Collision { a: u32, b: u32 },
    OffRoad { id: u32 },
    LaneChangeCompleted { id: u32 },
    /// The ego command was outside the action bounds and got clamped.
    Clamped { id: u32 },
}

/// Rule-based behaviour of one non-ego vehicle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NpcPolicy {
    pub idm: IdmParams,
    pub lane_change_rule: LaneChangeRule,
    /// Ground-truth maneuver label; set when the change is committed,
    /// `NPC_PREP_TIME` before lateral motion.
    pub planned_maneuver: IntentLabel,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct LaneChange {
    /// Target lane, possibly outside the carriageway for the ego.
    to_lane: isize,
    y0: f64,
    y1: f64,
    elapsed: f64,
}

impl LaneChange {
    /// Smoothstep lateral profile: position, velocity, acceleration.
    fn profile(&self, t: f64) -> (f64, f64, f64) {
        let d = LANE_CHANGE_DURATION;
        let s = (t / d).clamp(0.0, 1.0);
        let dy = self.y1 - self.y0;
        (
            self.y0 + dy * (3.0 * s * s - 2.0 * s * s * s),
            dy * (6.0 * s - 6.0 * s * s) / d,
            dy * (6.0 - 12.0 * s) / (d * d),
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Driver {
    policy: NpcPolicy,
    prep_left: Option<f64>,
    cooldown: f64,
    change: Option<LaneChange>,
}

/// How the ego vehicle is driven.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EgoMode {
    /// Follows the `ControlCommand` handed to `step`.
    Controlled,
    /// Drives like every other NPC; commands are ignored.
    Autopilot,
}

/// Phase of a vehicle's lateral behaviour, exposed for dataset labelling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LateralPhase {
    Keeping,
    Preparing(IntentLabel),
    Changing(IntentLabel),
}

#[derive(Clone, Debug)]
pub struct World {
    pub config: ScenarioConfig,
    pub vehicles: Vec<VehicleState>,
    drivers: Vec<Driver>,
    ego_mode: EgoMode,
    tick: usize,
}

/// Per-lane vehicles sorted by longitudinal position. A vehicle in the
/// middle of a lane change occupies both lanes.
struct LaneIndex {
    lanes: Vec<Vec<(f64, usize)>>,
    road_length: f64,
}

impl LaneIndex {
    fn build(vehicles: &[VehicleState], drivers: &[Driver], lane_count: usize, road_length: f64) -> Self {
        let mut lanes = vec![Vec::new(); lane_count];
        for (i, v) in vehicles.iter().enumerate() {
            if v.lane_index < lane_count {
                lanes[v.lane_index].push((v.x, i));
            }
            if let Some(c) = drivers[i].change {
                if c.to_lane >= 0 && (c.to_lane as usize) < lane_count && c.to_lane as usize != v.lane_index {
                    lanes[c.to_lane as usize].push((v.x, i));
                }
            }
        }
        for l in &mut lanes {
            l.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        Self { lanes, road_length }
    }

    /// Nearest vehicle strictly ahead of `x` in `lane`, with its forward
    /// distance. `exclude` is skipped.
    fn ahead(&self, lane: usize, x: f64, exclude: usize) -> Option<(usize, f64)> {
        let l = self.lanes.get(lane)?;
        let start = l.partition_point(|e| e.0 <= x);
        (0..l.len())
            .map(|k| l[(start + k) % l.len()])
            .find(|e| e.1 != exclude)
            .map(|(xj, j)| (j, (xj - x).rem_euclid(self.road_length)))
    }

    /// Nearest vehicle at or behind `x` in `lane`, with its backward distance.
    fn behind(&self, lane: usize, x: f64, exclude: usize) -> Option<(usize, f64)> {
        let l = self.lanes.get(lane)?;
        let start = l.partition_point(|e| e.0 <= x);
        (1..=l.len())
            .map(|k| l[(start + l.len() - k) % l.len()])
            .find(|e| e.1 != exclude)
            .map(|(xj, j)| (j, (x - xj).rem_euclid(self.road_length)))
    }
}

impl World {
    pub fn new(config: &ScenarioConfig, ego_mode: EgoMode) -> Result<Self, WorldError> {
        let vehicles = build_scenario(config)?;
        // Behaviour parameters come from their own stream so that changing
        // them never perturbs the spawn layout.
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        rng.set_stream(1);
        let [lo, hi] = config.npc_speed_range;
        let drivers = vehicles
            .iter()
            .enumerate()
            .map(|(i, _)| {
                let desired = if i == 0 {
                    config.ego_desired_speed
                } else if hi > lo {
                    rng.random_range(lo..hi)
                } else {
                    lo.max(0.1)
                };
                Driver {
                    policy: NpcPolicy {
                        idm: IdmParams {
                            desired_speed: desired.max(0.1),
                            time_headway: rng.random_range(1.2..1.8),
                            min_gap: 2.0,
                            max_accel: 1.5,
                            comfortable_decel: 2.0,
                        },
                        lane_change_rule: LaneChangeRule::default(),
                        planned_maneuver: IntentLabel::Straight,
                    },
                    prep_left: None,
                    cooldown: 0.0,
                    change: None,
                }
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            vehicles,
            drivers,
            ego_mode,
            tick: 0,
        })
    }

    /// World from explicit states (index 0 is the ego); every vehicle gets
    /// the given NPC policy.
    pub fn from_states(config: &ScenarioConfig, vehicles: Vec<VehicleState>, npc: NpcPolicy, ego_mode: EgoMode) -> Self {
        let drivers = vehicles
            .iter()
            .map(|_| Driver {
                policy: npc,
                prep_left: None,
                cooldown: 0.0,
                change: None,
            })
            .collect();
        Self {
            config: config.clone(),
            vehicles,
            drivers,
            ego_mode,
            tick: 0,
        }
    }

    pub fn tick(&self) -> usize {
        self.tick
    }

    pub fn ego(&self) -> &VehicleState {
        &self.vehicles[0]
    }

    pub fn npc_policy(&self, index: usize) -> &NpcPolicy {
        &self.drivers[index].policy
    }

    pub fn lateral_phase(&self, index: usize) -> LateralPhase {
        let d = &self.drivers[index];
        if let Some(c) = d.change {
            let dir = if c.to_lane > self.vehicles[index].lane_index as isize || c.y1 > c.y0 {
                IntentLabel::LeftTurn
            } else {
                IntentLabel::RightTurn
            };
            return LateralPhase::Changing(dir);
        }
        if d.prep_left.is_some() {
            return LateralPhase::Preparing(d.policy.planned_maneuver);
        }
        LateralPhase::Keeping
    }

    /// Whether vehicle `index` evaluates a lane change during the next step.
    pub fn will_consider_lane_change(&self, index: usize) -> bool {
        if index == 0 && self.ego_mode == EgoMode::Controlled {
            return false;
        }
        let d = &self.drivers[index];
        d.change.is_none()
            && d.prep_left.is_none()
            && d.cooldown - self.config.tick <= 0.0
            && (self.tick + self.vehicles[index].id as usize) % NPC_DECISION_PERIOD == 0
    }

    pub fn ego_changing_lanes(&self) -> bool {
        self.drivers[0].change.is_some()
    }

    /// Same-lane leader of vehicle `i`: `(index, bumper gap)` within `range` meters.
    pub fn leader_of(&self, i: usize, range: f64) -> Option<(usize, f64)> {
        let me = &self.vehicles[i];
        self.vehicles
            .iter()
            .enumerate()
            .filter(|(j, v)| *j != i && v.lane_index == me.lane_index)
            .filter_map(|(j, v)| {
                let dx = self.config.ring_dx(me.x, v.x);
                (dx > 0.0 && dx <= range).then(|| (j, dx - 0.5 * (me.length + v.length)))
            })
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
    }

    fn leader_input(&self, idx: &LaneIndex, i: usize, lane: usize, x: f64) -> Option<(f64, f64)> {
        idx.ahead(lane, x, i).map(|(j, dx)| {
            let gap = dx - 0.5 * (self.vehicles[i].length + self.vehicles[j].length);
            (gap, self.vehicles[j].v_x)
        })
    }

    fn idm_accel(&self, idx: &LaneIndex, i: usize) -> f64 {
        let v = &self.vehicles[i];
        let idm = &self.drivers[i].policy.idm;
        let mut a = idm.accel(v.v_x, self.leader_input(idx, i, v.lane_index, v.x));
        if let Some(c) = self.drivers[i].change {
            if c.to_lane >= 0 && (c.to_lane as usize) < self.config.lane_count {
                a = a.min(idm.accel(v.v_x, self.leader_input(idx, i, c.to_lane as usize, v.x)));
            }
        }
        a
    }

    /// MOBIL evaluation for one adjacent lane.
    fn lane_change_incentive(&self, idx: &LaneIndex, i: usize, target: usize) -> Option<f64> {
        let me = &self.vehicles[i];
        let pol = &self.drivers[i].policy;
        let lead_new = idx.ahead(target, me.x, i);
        let follow_new = idx.behind(target, me.x, i);
        let half = |j: usize| 0.5 * (me.length + self.vehicles[j].length);
        if let Some((j, dx)) = lead_new {
            if dx - half(j) < pol.idm.min_gap {
                return None;
            }
        }
        if let Some((j, dx)) = follow_new {
            if dx - half(j) < self.drivers[j].policy.idm.min_gap {
                return None;
            }
        }
        let gap_to = |j: usize, dx: f64| (dx - half(j), self.vehicles[j].v_x);
        let me_now = pol.idm.accel(me.v_x, self.leader_input(idx, i, me.lane_index, me.x));
        let me_new = pol.idm.accel(me.v_x, lead_new.map(|(j, dx)| gap_to(j, dx)));
        let (nf, nf_new) = match follow_new {
            Some((j, dx)) => {
                let f = &self.vehicles[j];
                let idm = &self.drivers[j].policy.idm;
                let before = lead_new.map(|(l, dxl)| {
                    let d = dx + dxl;
                    (d - 0.5 * (f.length + self.vehicles[l].length), self.vehicles[l].v_x)
                });
                let after = Some((dx - 0.5 * (f.length + me.length), me.v_x));
                (idm.accel(f.v_x, before), idm.accel(f.v_x, after))
            }
            None => (0.0, 0.0),
        };
        let (of, of_new) = match idx.behind(me.lane_index, me.x, i) {
            Some((j, dx)) => {
                let f = &self.vehicles[j];
                let idm = &self.drivers[j].policy.idm;
                let before = Some((dx - 0.5 * (f.length + me.length), me.v_x));
                let after = idx.ahead(me.lane_index, me.x, i).filter(|(l, _)| *l != j).map(|(l, dxl)| {
                    let d = dx + dxl;
                    (d - 0.5 * (f.length + self.vehicles[l].length), self.vehicles[l].v_x)
                });
                (idm.accel(f.v_x, before), idm.accel(f.v_x, after))
            }
            None => (0.0, 0.0),
        };
        pol.lane_change_rule.incentive(&MobilInputs {
            me: me_now,
            me_new,
            new_follower: nf,
            new_follower_new: nf_new,
            old_follower: of,
            old_follower_new: of_new,
        })
    }

    fn best_lane_change(&self, idx: &LaneIndex, i: usize) -> Option<IntentLabel> {
        let lane = self.vehicles[i].lane_index;
        let threshold = self.drivers[i].policy.lane_change_rule.threshold;
        let mut best: Option<(f64, IntentLabel)> = None;
        // Left first so that ties prefer overtaking on the left.
        if lane + 1 < self.config.lane_count {
            if let Some(g) = self.lane_change_incentive(idx, i, lane + 1) {
                if g > threshold {
                    best = Some((g, IntentLabel::LeftTurn));
                }
            }
        }
        if lane > 0 {
            if let Some(g) = self.lane_change_incentive(idx, i, lane - 1) {
                if g > threshold && best.is_none_or(|(b, _)| g > b) {
                    best = Some((g, IntentLabel::RightTurn));
                }
            }
        }
        best.map(|(_, d)| d)
    }

    fn start_change(&mut self, i: usize, dir: isize) {
        let v = &self.vehicles[i];
        let to_lane = v.lane_index as isize + dir;
        let y1 = (to_lane as f64 + 0.5) * LANE_WIDTH;
        self.drivers[i].change = Some(LaneChange {
            to_lane,
            y0: v.y,
            y1,
            elapsed: 0.0,
        });
    }

    /// Advance the world by `dt`. Returns the events raised during the step.
    pub fn step(&mut self, ego_action: &ControlCommand, dt: f64) -> Vec<SimEvent> {
        assert!(dt > 0.0, "step requires dt > 0");
        let mut events = Vec::new();
        let cfg = self.config.clone();
        let idx = LaneIndex::build(&self.vehicles, &self.drivers, cfg.lane_count, cfg.road_length);
        let n = self.vehicles.len();

        let (cmd, clamped) = ego_action.clamped();
        if clamped && self.ego_mode == EgoMode::Controlled {
            events.push(SimEvent::Clamped { id: self.vehicles[0].id });
        }

        // Longitudinal commands and lateral decisions from the current state.
        let mut accel = vec![0.0; n];
        let mut starts: Vec<(usize, isize)> = Vec::new();
        for i in 0..n {
            let controlled = i == 0 && self.ego_mode == EgoMode::Controlled;
            if controlled {
                accel[i] = cmd.accel;
                if self.drivers[i].change.is_none() {
                    match cmd.maneuver {
                        Maneuver::LeftChange => starts.push((i, 1)),
                        Maneuver::RightChange => starts.push((i, -1)),
                        Maneuver::Keep => {}
                    }
                }
                continue;
            }
            accel[i] = self.idm_accel(&idx, i);
            let d = &mut self.drivers[i];
            d.cooldown = (d.cooldown - dt).max(0.0);
            if d.change.is_some() {
                continue;
            }
            if let Some(left) = d.prep_left {
                let left = left - dt;
                if left > 1e-9 {
                    self.drivers[i].prep_left = Some(left);
                    continue;
                }
                // Commit only if the move is still acceptable.
                let planned = self.drivers[i].policy.planned_maneuver;
                let lane = self.vehicles[i].lane_index;
                let target = match planned {
                    IntentLabel::LeftTurn => lane + 1,
                    IntentLabel::RightTurn => lane.wrapping_sub(1),
                    IntentLabel::Straight => usize::MAX,
                };
                let still_ok = target < cfg.lane_count && self.lane_change_incentive(&idx, i, target).is_some();
                let d = &mut self.drivers[i];
                d.prep_left = None;
                if still_ok {
                    starts.push((i, if planned == IntentLabel::LeftTurn { 1 } else { -1 }));
                } else {
                    d.policy.planned_maneuver = IntentLabel::Straight;
                    d.cooldown = 1.0;
                }
                continue;
            }
            if d.cooldown > 0.0 || (self.tick + self.vehicles[i].id as usize) % NPC_DECISION_PERIOD != 0 {
                continue;
            }
            if let Some(dir) = self.best_lane_change(&idx, i) {
                let d = &mut self.drivers[i];
                d.policy.planned_maneuver = dir;
                d.prep_left = Some(NPC_PREP_TIME);
            }
        }
        for (i, dir) in starts {
            self.start_change(i, dir);
        }

        // Integrate.
        for i in 0..n {
            let controlled = i == 0 && self.ego_mode == EgoMode::Controlled;
            let old_lane = self.vehicles[i].lane_index;
            let old_heading = self.vehicles[i].heading;
            let v = &mut self.vehicles[i];
            v.x += v.v_x * dt;
            let v_next = (v.v_x + accel[i] * dt).clamp(0.0, cfg.v_max_world);
            v.a_x = (v_next - v.v_x) / dt;
            if (v.a_x - accel[i]).abs() < 1e-12 {
                v.a_x = accel[i];
            }
            v.v_x = v_next;
            v.x = cfg.wrap_x(v.x);

            let d = &mut self.drivers[i];
            let mut completed = false;
            if let Some(c) = d.change.as_mut() {
                c.elapsed += dt;
                let (y, vy, ay) = c.profile(c.elapsed);
                let done = c.elapsed >= LANE_CHANGE_DURATION - 1e-9;
                v.y = if done { c.y1 } else { y };
                v.v_y = if done { 0.0 } else { vy };
                v.a_y = ay;
                if done {
                    d.change = None;
                    d.cooldown = NPC_COOLDOWN;
                    d.policy.planned_maneuver = IntentLabel::Straight;
                    completed = true;
                }
            } else if controlled {
                let center = cfg.lane_center(old_lane);
                let vy = v.v_x * cmd.heading.sin() - EGO_CENTERING_GAIN * (v.y - center);
                v.a_y = (vy - v.v_y) / dt;
                v.v_y = vy;
                v.y += vy * dt;
            } else {
                v.a_y = 0.0;
                v.v_y = 0.0;
            }
            // Keep the speed magnitude under the world cap.
            let lat = v.v_y.abs().min(cfg.v_max_world);
            let cap = (cfg.v_max_world * cfg.v_max_world - lat * lat).sqrt();
            if v.v_x > cap {
                v.v_x = cap;
            }
            v.heading = if v.speed() > 1e-6 { v.v_y.atan2(v.v_x) } else { old_heading };
            match cfg.lane_of(v.y) {
                Some(l) => v.lane_index = l,
                None => events.push(SimEvent::OffRoad { id: v.id }),
            }
            if completed || (controlled && v.lane_index != old_lane && d.change.is_none()) {
                events.push(SimEvent::LaneChangeCompleted { id: v.id });
            }
        }

        events.extend(self.collisions().into_iter().map(|(a, b)| SimEvent::Collision { a, b }));
        self.tick += 1;
        events
    }

    /// Overlapping pairs `(lower id, higher id)`, sorted.
    pub fn collisions(&self) -> Vec<(u32, u32)> {
        let n = self.vehicles.len();
        if n < 2 {
            return Vec::new();
        }
        let reach = self
            .vehicles
            .iter()
            .map(|v| v.length.hypot(v.width))
            .fold(0.0, f64::max);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| self.vehicles[a].x.total_cmp(&self.vehicles[b].x).then(a.cmp(&b)));
        let mut out = Vec::new();
        for (p, &i) in order.iter().enumerate() {
            let a = &self.vehicles[i];
            for k in 1..n {
                let j = order[(p + k) % n];
                let b = &self.vehicles[j];
                let dx = (b.x - a.x).rem_euclid(self.config.road_length);
                if dx > reach {
                    break;
                }
                if (b.y - a.y).abs() > reach {
                    continue;
                }
                if rects_overlap(&a.footprint(), &b.footprint_shifted(a.x + dx - b.x)) {
                    out.push((a.id.min(b.id), a.id.max(b.id)));
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}
