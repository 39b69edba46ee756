mod common;

use common::hand::hand_episode;
use rowdrive_core::harness::{compute_metrics, tick_series};

const TOL: f64 = 1e-12;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

#[test]
fn hand_episode_metrics() {
    let m = compute_metrics(&[hand_episode()]).unwrap();
    assert_eq!(m.episodes, 1);
    assert!(close(m.avg_velocity, 32.0 / 3.0), "{}", m.avg_velocity);
    assert!(close(m.avg_acceleration, 2.0), "{}", m.avg_acceleration);
    assert!(close(m.avg_yaw_rate, 0.5), "{}", m.avg_yaw_rate);
    assert!(close(m.min_thw.unwrap(), 5.5 / 8.0), "{:?}", m.min_thw);
    assert!(close(m.avg_row_violations, 2.0));
    assert!(close(m.avg_lane_changes, 1.0));
}

#[test]
fn hand_episode_tick_series() {
    let s = tick_series(&hand_episode());
    let thw: Vec<f64> = s.iter().map(|t| t.thw.unwrap()).collect();
    for (got, want) in thw.iter().zip([2.55, 15.5 / 12.0, 5.5 / 8.0]) {
        assert!(close(*got, want), "{got} vs {want}");
    }
    assert_eq!(s[0].yaw_rate, 0.0);
}

#[test]
fn slow_ego_and_empty_lane_have_no_headway() {
    let mut log = hand_episode();
    for t in &mut log.ticks {
        t.vehicles.retain(|v| v.id == 0);
        t.vehicles[0].v_x = 0.2;
    }
    assert_eq!(compute_metrics(&[log]).unwrap().min_thw, None);
}

#[test]
fn episodes_pool_ticks_and_average_counts() {
    let mut short = hand_episode();
    short.ticks.truncate(1);
    let m = compute_metrics(&[hand_episode(), short]).unwrap();
    assert_eq!(m.episodes, 2);
    assert!(close(m.avg_velocity, 42.0 / 4.0));
    assert!(close(m.avg_row_violations, 1.0));
    assert!(close(m.avg_lane_changes, 0.5));
    assert!(close(m.min_thw.unwrap(), (5.5 / 8.0 + 2.55) / 2.0));
}
