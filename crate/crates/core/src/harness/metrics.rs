//! Driving metrics computed from episode logs.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::sim::{SimEvent, THW_RANGE};
use crate::world::{EpisodeLog, EGO_ID};

/// Time headway is undefined below this ego speed, m/s.
pub const THW_MIN_SPEED: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub avg_velocity: f64,
    pub avg_acceleration: f64,
    pub avg_yaw_rate: f64,
    /// Mean over episodes of each episode's minimum time headway; `None`
    /// when no episode ever had a leader.
    pub min_thw: Option<f64>,
    pub avg_row_violations: f64,
    pub avg_lane_changes: f64,
    pub episodes: usize,
}

/// One row of the per-tick metric series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickMetrics {
    pub tick: usize,
    pub speed: f64,
    pub accel: f64,
    pub yaw_rate: f64,
    pub thw: Option<f64>,
    pub reward: f64,
}

/// Ego time headway at one tick record, if a same-lane leader is within
/// range and the ego is moving.
pub fn time_headway(log: &EpisodeLog, k: usize) -> Option<f64> {
    let rec = &log.ticks[k];
    let ego = rec.ego()?;
    if ego.v_x < THW_MIN_SPEED {
        return None;
    }
    let gap = rec
        .vehicles
        .iter()
        .filter(|v| v.id != EGO_ID && v.lane_index == ego.lane_index)
        .filter_map(|v| {
            let dx = log.scenario.ring_dx(ego.x, v.x);
            (dx > 0.0 && dx <= THW_RANGE).then(|| dx - 0.5 * (ego.length + v.length))
        })
        .min_by(f64::total_cmp)?;
    Some(gap.max(0.0) / ego.v_x)
}

pub fn tick_series(log: &EpisodeLog) -> Vec<TickMetrics> {
    let dt = log.scenario.tick;
    let mut prev_heading: Option<f64> = None;
    let mut out = Vec::with_capacity(log.ticks.len());
    for (k, rec) in log.ticks.iter().enumerate() {
        let Some(ego) = rec.ego() else { continue };
        let yaw_rate = prev_heading.map(|h| (ego.heading - h).abs() / dt).unwrap_or(0.0);
        prev_heading = Some(ego.heading);
        out.push(TickMetrics {
            tick: rec.tick,
            speed: ego.speed(),
            accel: ego.a_x.hypot(ego.a_y),
            yaw_rate,
            thw: time_headway(log, k),
            reward: rec.reward.total,
        });
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct EpisodeSummary {
    speed_sum: f64,
    ticks: f64,
    accel_sum: f64,
    yaw_sum: f64,
    yaw_pairs: f64,
    min_thw: Option<f64>,
    violations: f64,
    lane_changes: f64,
}

impl EpisodeSummary {
    fn key(&self) -> [u64; 8] {
        [
            self.speed_sum.to_bits(),
            self.ticks.to_bits(),
            self.accel_sum.to_bits(),
            self.yaw_sum.to_bits(),
            self.yaw_pairs.to_bits(),
            self.min_thw.map(f64::to_bits).unwrap_or(u64::MAX),
            self.violations.to_bits(),
            self.lane_changes.to_bits(),
        ]
    }
}

fn summarize(log: &EpisodeLog) -> EpisodeSummary {
    let series = tick_series(log);
    let violations: BTreeSet<(u32, u32, usize)> = log
        .ticks
        .iter()
        .flat_map(|t| t.violations.iter().map(|v| (v.violator_id, v.victim_id, v.onset_tick)))
        .collect();
    let lane_changes = log
        .ticks
        .iter()
        .flat_map(|t| &t.events)
        .filter(|e| matches!(e, SimEvent::LaneChangeCompleted { id } if *id == EGO_ID))
        .count();
    EpisodeSummary {
        speed_sum: series.iter().map(|m| m.speed).sum(),
        ticks: series.len() as f64,
        accel_sum: series.iter().map(|m| m.accel).sum(),
        yaw_sum: series.iter().skip(1).map(|m| m.yaw_rate).sum(),
        yaw_pairs: series.len().saturating_sub(1) as f64,
        min_thw: series.iter().filter_map(|m| m.thw).min_by(f64::total_cmp),
        violations: violations.len() as f64,
        lane_changes: lane_changes as f64,
    }
}

/// Aggregate metrics over `logs`. Per-episode summaries are combined in a
/// canonical order, so the report does not depend on the order of `logs`.
pub fn compute_metrics(logs: &[EpisodeLog]) -> Result<MetricsReport, HarnessError> {
    if logs.is_empty() {
        return Err(HarnessError::EmptyInput);
    }
    let mut sums: Vec<EpisodeSummary> = logs.iter().map(summarize).collect();
    sums.sort_by_key(EpisodeSummary::key);
    let total = |f: fn(&EpisodeSummary) -> f64| sums.iter().map(f).sum::<f64>();
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    let n = logs.len() as f64;
    let thws: Vec<f64> = sums.iter().filter_map(|s| s.min_thw).collect();
    Ok(MetricsReport {
        avg_velocity: ratio(total(|s| s.speed_sum), total(|s| s.ticks)),
        avg_acceleration: ratio(total(|s| s.accel_sum), total(|s| s.ticks)),
        avg_yaw_rate: ratio(total(|s| s.yaw_sum), total(|s| s.yaw_pairs)),
        min_thw: (!thws.is_empty()).then(|| thws.iter().sum::<f64>() / thws.len() as f64),
        avg_row_violations: total(|s| s.violations) / n,
        avg_lane_changes: total(|s| s.lane_changes) / n,
        episodes: logs.len(),
    })
}
