//! Ego-centric neighborhood grid around a target vehicle.

use crate::neural::Tensor2;
use crate::world::{ScenarioConfig, VehicleState, LANE_WIDTH};

/// Lanes covered by the grid: left of, same as and right of the target.
pub const GRID_LANES: usize = 3;
/// Longitudinal cells per lane.
pub const GRID_CELLS: usize = 5;
pub const CELL_LENGTH: f64 = 15.0;
/// Number of region vectors per time step.
pub const REGION_COUNT: usize = GRID_LANES * GRID_CELLS;
/// Occupancy, relative x, y, v_x, v_y, a_x.
pub const REGION_DIM: usize = 6;
/// Lane position, lateral offset, v_x, v_y, a_x of the target itself.
pub const SELF_DIM: usize = 5;

const HALF_SPAN: f64 = 0.5 * CELL_LENGTH * GRID_CELLS as f64;

/// `REGION_COUNT × REGION_DIM` grid for `vehicles[target]`. Row `r` is
/// lane offset `+1, 0, -1` (left, same, right) for `r / GRID_CELLS`, and
/// cells run rear to front. Empty cells are zero; cells beyond the road
/// edge carry occupancy −1.
pub fn region_grid(vehicles: &[VehicleState], target: usize, cfg: &ScenarioConfig) -> Tensor2 {
    let me = &vehicles[target];
    let mut grid = Tensor2::zeros(REGION_COUNT, REGION_DIM);
    let mut best = [f64::INFINITY; REGION_COUNT];
    for (row, offset) in [1isize, 0, -1].into_iter().enumerate() {
        let lane = me.lane_index as isize + offset;
        if lane < 0 || lane >= cfg.lane_count as isize {
            for c in 0..GRID_CELLS {
                grid.set(row * GRID_CELLS + c, 0, -1.0);
            }
        }
    }
    for (j, v) in vehicles.iter().enumerate() {
        if j == target {
            continue;
        }
        let offset = v.lane_index as isize - me.lane_index as isize;
        if offset.abs() > 1 {
            continue;
        }
        let dx = cfg.ring_dx(me.x, v.x);
        if !(-HALF_SPAN..HALF_SPAN).contains(&dx) {
            continue;
        }
        let cell = ((dx + HALF_SPAN) / CELL_LENGTH).floor() as usize;
        let row = (1 - offset) as usize;
        let idx = row * GRID_CELLS + cell.min(GRID_CELLS - 1);
        let center = -HALF_SPAN + (cell as f64 + 0.5) * CELL_LENGTH;
        let dist = (dx - center).abs();
        if dist >= best[idx] {
            continue;
        }
        best[idx] = dist;
        let r = grid.row_mut(idx);
        r[0] = 1.0;
        r[1] = dx / HALF_SPAN;
        r[2] = (v.y - me.y) / LANE_WIDTH;
        r[3] = (v.v_x - me.v_x) / 10.0;
        r[4] = (v.v_y - me.v_y) / 2.0;
        r[5] = (v.a_x - me.a_x) / 3.0;
    }
    grid
}

pub fn self_features(v: &VehicleState, cfg: &ScenarioConfig) -> [f64; SELF_DIM] {
    let lanes = cfg.lane_count.max(2) as f64 - 1.0;
    [
        2.0 * v.lane_index as f64 / lanes - 1.0,
        (v.y - cfg.lane_center(v.lane_index)) / (0.5 * LANE_WIDTH),
        v.v_x / 15.0,
        v.v_y / 2.0,
        v.a_x / 3.0,
    ]
}
