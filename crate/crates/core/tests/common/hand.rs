use rowdrive_core::agent::ControlCommand;
use rowdrive_core::reward::RewardBreakdown;
use rowdrive_core::row::RowViolationEvent;
use rowdrive_core::sim::SimEvent;
use rowdrive_core::world::{EpisodeLog, Outcome, ScenarioConfig, TickRecord, VehicleState};

fn car(id: u32, x: f64, lane: usize, v: (f64, f64), a: (f64, f64), heading: f64) -> VehicleState {
    VehicleState {
        id,
        x,
        y: 1.75 + 3.5 * lane as f64,
        v_x: v.0,
        v_y: v.1,
        a_x: a.0,
        a_y: a.1,
        heading,
        lane_index: lane,
        width: 1.8,
        length: 4.5,
    }
}

fn violation(violator_id: u32, victim_id: u32, tick: usize, onset_tick: usize) -> RowViolationEvent {
    RowViolationEvent {
        violator_id,
        victim_id,
        tick,
        onset_tick,
        overlap_area: 1.0,
        duration_so_far: (tick - onset_tick) as f64 * 0.1,
    }
}

fn record(tick: usize, vehicles: Vec<VehicleState>, violations: Vec<RowViolationEvent>, events: Vec<SimEvent>) -> TickRecord {
    TickRecord {
        tick,
        vehicles,
        action: ControlCommand::default(),
        reward: RewardBreakdown::default(),
        violations,
        events,
    }
}

/// Ego (id 0) follows car 1 in lane 0, then moves next to car 2 in lane 1.
///
/// | tick | ego speed | |a| | heading | leader gap | THW |
/// |------|-----------|-----|---------|------------|-----|
/// | 0    | 10        | 1   | 0       | 30 − 4.5   | 2.55 |
/// | 1    | 12        | 0   | 0.1     | 20 − 4.5   | 15.5 / 12 |
/// | 2    | hypot(8, 6) = 10 | hypot(3, 4) = 5 | 0.1 | 10 − 4.5 | 5.5 / 8 |
pub fn hand_episode() -> EpisodeLog {
    let scenario = ScenarioConfig {
        max_ticks: 3,
        ..ScenarioConfig::default()
    };
    let ticks = vec![
        record(
            0,
            vec![
                car(0, 0.0, 0, (10.0, 0.0), (1.0, 0.0), 0.0),
                car(1, 30.0, 0, (10.0, 0.0), (0.0, 0.0), 0.0),
                car(2, 10.0, 1, (10.0, 0.0), (0.0, 0.0), 0.0),
            ],
            vec![],
            vec![],
        ),
        record(
            1,
            vec![
                car(0, 1.0, 0, (12.0, 0.0), (0.0, 0.0), 0.1),
                car(1, 21.0, 0, (10.0, 0.0), (0.0, 0.0), 0.0),
                car(2, 11.0, 1, (10.0, 0.0), (0.0, 0.0), 0.0),
            ],
            vec![violation(0, 1, 1, 1)],
            vec![],
        ),
        record(
            2,
            vec![
                car(0, 2.0, 1, (8.0, 6.0), (3.0, 4.0), 0.1),
                car(1, 22.0, 0, (10.0, 0.0), (0.0, 0.0), 0.0),
                car(2, 12.0, 1, (10.0, 0.0), (0.0, 0.0), 0.0),
            ],
            vec![violation(0, 1, 2, 1), violation(2, 0, 2, 2)],
            vec![SimEvent::LaneChangeCompleted { id: 0 }, SimEvent::LaneChangeCompleted { id: 2 }],
        ),
    ];
    EpisodeLog {
        scenario,
        ticks,
        outcome: Outcome::SafeArrived,
    }
}
