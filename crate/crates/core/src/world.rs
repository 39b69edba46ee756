//! Domain types shared by the simulator, the learners and the harness.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::ControlCommand;
use crate::geometry::OrientedRect;
use crate::reward::RewardBreakdown;
use crate::row::RowViolationEvent;
use crate::sim::SimEvent;

/// Lateral width of every lane, in meters.
pub const LANE_WIDTH: f64 = 3.5;
/// The ego vehicle always carries id 0 and sits at index 0 of the world.
pub const EGO_ID: u32 = 0;
/// Number of surrounding vehicles exposed to the decision policy.
pub const NEIGHBOR_CAP: usize = 6;
/// Minimum bumper-to-bumper gap between vehicles at spawn time.
pub const MIN_SPAWN_GAP: f64 = 8.0;

const LOG_FORMAT: &str = "rowdrive-episode/1";

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("density {density} veh/km needs {required} vehicles but only {capacity} fit with {MIN_SPAWN_GAP} m gaps")]
    InfeasibleDensity {
        density: f64,
        required: usize,
        capacity: usize,
    },
    #[error("invalid scenario: {0}")]
    InvalidConfig(String),
    #[error("episode log i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("episode log format: {0}")]
    Format(String),
}

/// Kinematic snapshot of one vehicle in the road frame.
///
/// `x` is longitudinal position along the ring (vehicle center), `y` lateral
/// position measured from the right road edge. Heading is relative to the
/// lane direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub v_x: f64,
    pub v_y: f64,
    pub a_x: f64,
    pub a_y: f64,
    pub heading: f64,
    pub lane_index: usize,
    pub width: f64,
    pub length: f64,
}

impl VehicleState {
    pub fn speed(&self) -> f64 {
        self.v_x.hypot(self.v_y)
    }

    pub fn footprint(&self) -> OrientedRect {
        OrientedRect::new(self.x, self.y, self.length, self.width, self.heading)
    }

    /// Footprint shifted by `dx` along the road, used to unwrap the ring.
    pub fn footprint_shifted(&self, dx: f64) -> OrientedRect {
        OrientedRect::new(self.x + dx, self.y, self.length, self.width, self.heading)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub lane_count: usize,
    /// Ring circumference in meters.
    pub road_length: f64,
    /// Vehicles per km over the whole carriageway, ego included.
    pub density: f64,
    pub tick: f64,
    pub max_ticks: usize,
    pub rng_seed: u64,
    pub ego_desired_speed: f64,
    pub npc_speed_range: [f64; 2],
    pub k_rho: f64,
    pub a_max: f64,
    pub v_max_world: f64,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            lane_count: 3,
            road_length: 1000.0,
            density: 100.0,
            tick: 0.1,
            max_ticks: 600,
            rng_seed: 0,
            ego_desired_speed: 15.0,
            npc_speed_range: [10.0, 16.0],
            k_rho: 0.5,
            a_max: 5.0,
            v_max_world: 30.0,
            vehicle_length: 4.5,
            vehicle_width: 1.8,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), WorldError> {
        let bad = |m: &str| Err(WorldError::InvalidConfig(m.to_string()));
        if self.lane_count == 0 {
            return bad("lane_count must be at least 1");
        }
        if !(self.road_length > 0.0) {
            return bad("road_length must be positive");
        }
        if !(self.density >= 0.0) {
            return bad("density must be non-negative");
        }
        if !(self.tick > 0.0) {
            return bad("tick must be positive");
        }
        if self.max_ticks == 0 {
            return bad("max_ticks must be positive");
        }
        if !(self.a_max > 0.0) || !(self.k_rho >= 0.0) {
            return bad("a_max must be positive and k_rho non-negative");
        }
        let [lo, hi] = self.npc_speed_range;
        if !(lo >= 0.0 && hi >= lo && hi <= self.v_max_world) {
            return bad("npc_speed_range must satisfy 0 <= lo <= hi <= v_max_world");
        }
        if !(self.ego_desired_speed > 0.0 && self.ego_desired_speed <= self.v_max_world) {
            return bad("ego_desired_speed must lie in (0, v_max_world]");
        }
        if !(self.vehicle_length > 0.0 && self.vehicle_width > 0.0) {
            return bad("vehicle dimensions must be positive");
        }
        if self.vehicle_width > LANE_WIDTH {
            return bad("vehicle_width exceeds the lane width");
        }
        Ok(())
    }

    /// Vehicles required by the density, ego included.
    pub fn vehicle_count(&self) -> usize {
        (self.density * self.road_length / 1000.0).floor() as usize
    }

    /// Vehicles that fit with `MIN_SPAWN_GAP` between bumpers.
    pub fn spawn_capacity(&self) -> usize {
        let per_lane = (self.road_length / (self.vehicle_length + MIN_SPAWN_GAP)).floor() as usize;
        per_lane * self.lane_count
    }

    pub fn road_width(&self) -> f64 {
        self.lane_count as f64 * LANE_WIDTH
    }

    pub fn lane_center(&self, lane: usize) -> f64 {
        (lane as f64 + 0.5) * LANE_WIDTH
    }

    /// Lane containing lateral position `y`, or `None` off the carriageway.
    pub fn lane_of(&self, y: f64) -> Option<usize> {
        if !(0.0..self.road_width()).contains(&y) {
            return None;
        }
        Some(((y / LANE_WIDTH).floor() as usize).min(self.lane_count - 1))
    }

    /// Signed longitudinal offset from `from` to `to` on the ring, in
    /// `[-road_length/2, road_length/2)`.
    pub fn ring_dx(&self, from: f64, to: f64) -> f64 {
        ring_dx(from, to, self.road_length)
    }

    pub fn wrap_x(&self, x: f64) -> f64 {
        x.rem_euclid(self.road_length)
    }
}

pub fn ring_dx(from: f64, to: f64, road_length: f64) -> f64 {
    let half = 0.5 * road_length;
    (to - from + half).rem_euclid(road_length) - half
}

/// Spawn the initial world. Index 0 is the ego vehicle.
pub fn build_scenario(config: &ScenarioConfig) -> Result<Vec<VehicleState>, WorldError> {
    config.validate()?;
    let required = config.vehicle_count().max(1);
    let capacity = config.spawn_capacity();
    if required > capacity {
        return Err(WorldError::InfeasibleDensity {
            density: config.density,
            required,
            capacity,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let lanes = config.lane_count;
    let slots_per_lane = capacity / lanes;
    let slot_len = config.road_length / slots_per_lane as f64;
    let slack = (slot_len - config.vehicle_length - MIN_SPAWN_GAP).max(0.0);

    // Round-robin lane assignment, starting from a random lane, then a random
    // subset of slots in each lane.
    let first_lane = rng.random_range(0..lanes);
    let mut per_lane = vec![0usize; lanes];
    for k in 0..required {
        per_lane[(first_lane + k) % lanes] += 1;
    }
    let mut placed: Vec<(usize, f64)> = Vec::with_capacity(required);
    for (lane, &count) in per_lane.iter().enumerate() {
        let slots = choose_slots(&mut rng, slots_per_lane, count);
        for slot in slots {
            let jitter = if slack > 0.0 {
                rng.random_range(-0.5..0.5) * slack
            } else {
                0.0
            };
            placed.push((lane, slot as f64 * slot_len + 0.5 * slot_len + jitter));
        }
    }
    // The ego takes a uniformly chosen spawn position.
    let ego_pos = rng.random_range(0..placed.len());
    placed.swap(0, ego_pos);

    let mut vehicles: Vec<VehicleState> = placed
        .iter()
        .enumerate()
        .map(|(i, &(lane, x))| VehicleState {
            id: i as u32,
            x: config.wrap_x(x),
            y: config.lane_center(lane),
            v_x: 0.0,
            v_y: 0.0,
            a_x: 0.0,
            a_y: 0.0,
            heading: 0.0,
            lane_index: lane,
            width: config.vehicle_width,
            length: config.vehicle_length,
        })
        .collect();

    // Initial speeds: a draw from the free-flow range, capped so that every
    // vehicle starts with a comfortable headway to its leader.
    let [lo, hi] = config.npc_speed_range;
    for i in 0..vehicles.len() {
        let wanted = if i == 0 {
            config.ego_desired_speed
        } else if hi > lo {
            rng.random_range(lo..hi)
        } else {
            lo
        };
        let gap = leader_gap(&vehicles, i, config).unwrap_or(f64::INFINITY);
        let safe = ((gap - 2.0) / 1.5).max(0.0);
        vehicles[i].v_x = wanted.min(safe).min(config.v_max_world);
    }
    Ok(vehicles)
}

fn choose_slots(rng: &mut ChaCha8Rng, slots: usize, count: usize) -> Vec<usize> {
    // Partial Fisher-Yates; sorted afterwards so ids follow road order.
    let mut all: Vec<usize> = (0..slots).collect();
    for i in 0..count {
        let j = rng.random_range(i..slots);
        all.swap(i, j);
    }
    let mut chosen = all[..count].to_vec();
    chosen.sort_unstable();
    chosen
}

/// Bumper-to-bumper gap from vehicle `i` to the nearest vehicle ahead in the
/// same lane, if any.
pub fn leader_gap(vehicles: &[VehicleState], i: usize, config: &ScenarioConfig) -> Option<f64> {
    let me = &vehicles[i];
    vehicles
        .iter()
        .enumerate()
        .filter(|(j, v)| *j != i && v.lane_index == me.lane_index)
        .map(|(_, v)| {
            let dx = config.ring_dx(me.x, v.x).rem_euclid(config.road_length);
            dx - 0.5 * (me.length + v.length)
        })
        .min_by(|a, b| a.total_cmp(b))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IntentLabel {
    LeftTurn,
    Straight,
    RightTurn,
}

impl IntentLabel {
    pub const ALL: [IntentLabel; 3] = [IntentLabel::LeftTurn, IntentLabel::Straight, IntentLabel::RightTurn];

    pub fn index(self) -> usize {
        match self {
            IntentLabel::LeftTurn => 0,
            IntentLabel::Straight => 1,
            IntentLabel::RightTurn => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn one_hot(self) -> [f64; 3] {
        let mut v = [0.0; 3];
        v[self.index()] = 1.0;
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub state: VehicleState,
    pub intention: Option<IntentLabel>,
}

/// The ego plus its nearest surrounding vehicles, closest first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborSet {
    pub ego: VehicleState,
    pub neighbors: Vec<Neighbor>,
}

impl NeighborSet {
    /// Collect up to `cap` vehicles nearest to `vehicles[ego_index]` by ring
    /// aware Euclidean distance. Ties break on id.
    pub fn gather(vehicles: &[VehicleState], ego_index: usize, config: &ScenarioConfig, cap: usize) -> Self {
        let ego = vehicles[ego_index];
        let mut ranked: Vec<(f64, u32, usize)> = vehicles
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != ego_index)
            .map(|(j, v)| {
                let dx = config.ring_dx(ego.x, v.x);
                (dx.hypot(v.y - ego.y), v.id, j)
            })
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let neighbors = ranked
            .into_iter()
            .take(cap)
            .map(|(_, _, j)| Neighbor {
                state: vehicles[j],
                intention: None,
            })
            .collect();
        Self { ego, neighbors }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    SafeArrived,
    Collision,
    WrongLane,
    /// Reserved for logs truncated externally; the simulator maps surviving
    /// the full horizon to `SafeArrived`.
    Timeout,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: usize,
    pub vehicles: Vec<VehicleState>,
    pub action: ControlCommand,
    pub reward: RewardBreakdown,
    pub violations: Vec<RowViolationEvent>,
    pub events: Vec<SimEvent>,
}

impl TickRecord {
    pub fn ego(&self) -> Option<&VehicleState> {
        self.vehicles.iter().find(|v| v.id == EGO_ID)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub scenario: ScenarioConfig,
    pub ticks: Vec<TickRecord>,
    pub outcome: Outcome,
}

#[derive(Serialize, Deserialize)]
struct LogHeader {
    format: String,
    scenario: ScenarioConfig,
    outcome: Outcome,
    tick_count: usize,
}

impl EpisodeLog {
    /// Header line followed by one JSON object per tick.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), WorldError> {
        let header = LogHeader {
            format: LOG_FORMAT.to_string(),
            scenario: self.scenario.clone(),
            outcome: self.outcome,
            tick_count: self.ticks.len(),
        };
        serde_json::to_writer(&mut w, &header).map_err(|e| WorldError::Format(e.to_string()))?;
        w.write_all(b"\n")?;
        for t in &self.ticks {
            serde_json::to_writer(&mut w, t).map_err(|e| WorldError::Format(e.to_string()))?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_jsonl_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory cannot fail");
        buf
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, WorldError> {
        let mut lines = r.lines();
        let first = lines
            .next()
            .ok_or_else(|| WorldError::Format("empty log".into()))??;
        let header: LogHeader =
            serde_json::from_str(&first).map_err(|e| WorldError::Format(format!("header: {e}")))?;
        if header.format != LOG_FORMAT {
            return Err(WorldError::Format(format!("unsupported format {}", header.format)));
        }
        let mut ticks = Vec::with_capacity(header.tick_count);
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let t: TickRecord = serde_json::from_str(&line)
                .map_err(|e| WorldError::Format(format!("tick line {}: {e}", n + 2)))?;
            ticks.push(t);
        }
        if ticks.len() != header.tick_count {
            return Err(WorldError::Format(format!(
                "header announces {} ticks, found {}",
                header.tick_count,
                ticks.len()
            )));
        }
        Ok(Self {
            scenario: header.scenario,
            ticks,
            outcome: header.outcome,
        })
    }

    pub fn ego_series(&self) -> impl Iterator<Item = &VehicleState> {
        self.ticks.iter().filter_map(|t| t.ego())
    }
}
