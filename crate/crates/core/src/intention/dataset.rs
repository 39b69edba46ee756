//! Labelled intention windows harvested from NPC traffic.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{region_grid, self_features, REGION_COUNT, REGION_DIM, SELF_DIM};
use super::IntentionError;
use crate::agent::ControlCommand;
use crate::par;
use crate::sim::{EgoMode, LateralPhase, World};
use crate::world::{IntentLabel, ScenarioConfig, VehicleState};

/// Values per frame: region grid followed by self features.
pub const FRAME_WIDTH: usize = REGION_COUNT * REGION_DIM + SELF_DIM;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub scenario: ScenarioConfig,
    pub episodes: usize,
    /// Longest window captured per sample, in ticks.
    pub window_ticks: usize,
    /// Gap between the end of a window and the onset of lateral motion.
    pub horizon_ticks: usize,
    /// Fraction of lane-keeping decisions kept as `Straight` candidates.
    pub straight_rate: f64,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig {
                max_ticks: 1200,
                ..Default::default()
            },
            episodes: 150,
            window_ticks: 80,
            horizon_ticks: 10,
            straight_rate: 0.005,
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntentSample {
    pub label: IntentLabel,
    pub episode: usize,
    pub vehicle_id: u32,
    /// World tick of the last frame.
    pub end_tick: usize,
    /// World tick at which lateral motion became visible, for maneuvers.
    pub onset_tick: Option<usize>,
    /// `window_ticks × FRAME_WIDTH` values, oldest frame first.
    pub frames: Vec<f64>,
}

impl IntentSample {
    /// The last `steps` frames.
    pub fn tail(&self, steps: usize) -> &[f64] {
        let n = self.frames.len();
        &self.frames[n - steps * FRAME_WIDTH..]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntentDataset {
    pub window_ticks: usize,
    pub train: Vec<IntentSample>,
    pub test: Vec<IntentSample>,
}

impl IntentDataset {
    pub fn class_counts(samples: &[IntentSample]) -> [usize; 3] {
        let mut c = [0; 3];
        for s in samples {
            c[s.label.index()] += 1;
        }
        c
    }

    /// One JSON object per line: `{"label", "steps", "frames"}` plus ids.
    pub fn write_jsonl<W: Write>(samples: &[IntentSample], mut w: W) -> Result<(), IntentionError> {
        for s in samples {
            serde_json::to_writer(&mut w, s).map_err(|e| IntentionError::Format(e.to_string()))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<IntentSample>, IntentionError> {
        r.lines()
            .filter(|l| !matches!(l, Ok(s) if s.is_empty()))
            .map(|l| serde_json::from_str(&l?).map_err(|e| IntentionError::Format(e.to_string())))
            .collect()
    }
}

/// Append the frame of `vehicles[target]` to `out`.
pub fn push_frame(vehicles: &[VehicleState], target: usize, cfg: &ScenarioConfig, out: &mut Vec<f64>) {
    out.extend_from_slice(region_grid(vehicles, target, cfg).data());
    out.extend_from_slice(&self_features(&vehicles[target], cfg));
}

fn episode_seed(base: u64, episode: usize) -> u64 {
    base ^ (episode as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Harvest raw, unbalanced samples from one episode.
pub fn harvest_episode(cfg: &DatasetConfig, episode: usize) -> Result<Vec<IntentSample>, IntentionError> {
    let seed = episode_seed(cfg.seed, episode);
    let scenario = ScenarioConfig {
        rng_seed: seed,
        ..cfg.scenario.clone()
    };
    let mut world = World::new(&scenario, EgoMode::Autopilot)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(7);
    let keep = cfg.window_ticks + cfg.horizon_ticks + 1;
    let mut history: VecDeque<Vec<VehicleState>> = VecDeque::with_capacity(keep);
    history.push_back(world.vehicles.clone());
    let n = world.vehicles.len();
    let idle = ControlCommand::default();
    let mut out = Vec::new();
    let window = |history: &VecDeque<Vec<VehicleState>>, back: usize, i: usize| -> Option<Vec<f64>> {
        // Frames ending `back` snapshots before the newest.
        if history.len() < cfg.window_ticks + back {
            return None;
        }
        let end = history.len() - 1 - back;
        let mut frames = Vec::with_capacity(cfg.window_ticks * FRAME_WIDTH);
        for s in end + 1 - cfg.window_ticks..=end {
            push_frame(&history[s], i, &scenario, &mut frames);
        }
        Some(frames)
    };
    for _ in 0..scenario.max_ticks {
        let considering: Vec<bool> = (0..n).map(|i| world.will_consider_lane_change(i)).collect();
        let before: Vec<LateralPhase> = (0..n).map(|i| world.lateral_phase(i)).collect();
        world.step(&idle, scenario.tick);
        if history.len() == keep {
            history.pop_front();
        }
        history.push_back(world.vehicles.clone());
        let now = world.tick();
        for i in 0..n {
            let after = world.lateral_phase(i);
            match (before[i], after) {
                (LateralPhase::Preparing(dir), LateralPhase::Changing(_)) if dir != IntentLabel::Straight => {
                    if let Some(frames) = window(&history, cfg.horizon_ticks, i) {
                        out.push(IntentSample {
                            label: dir,
                            episode,
                            vehicle_id: world.vehicles[i].id,
                            end_tick: now - cfg.horizon_ticks,
                            onset_tick: Some(now),
                            frames,
                        });
                    }
                }
                (LateralPhase::Keeping, LateralPhase::Keeping) if considering[i] => {
                    if rng.random::<f64>() < cfg.straight_rate {
                        if let Some(frames) = window(&history, 0, i) {
                            out.push(IntentSample {
                                label: IntentLabel::Straight,
                                episode,
                                vehicle_id: world.vehicles[i].id,
                                end_tick: now,
                                onset_tick: None,
                                frames,
                            });
                        }
                    }
                }
                _ => {}
            }
        }
    }
    Ok(out)
}

/// Down-sample every class to the minority count, keeping generation order
/// within a class.
pub fn balance(samples: Vec<IntentSample>, seed: u64) -> Vec<IntentSample> {
    let mut by_class: [Vec<IntentSample>; 3] = Default::default();
    for s in samples {
        by_class[s.label.index()].push(s);
    }
    let m = by_class.iter().map(Vec::len).min().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(3 * m);
    for class in by_class.iter_mut() {
        let mut idx: Vec<usize> = (0..class.len()).collect();
        idx.shuffle(&mut rng);
        let mut chosen = idx[..m].to_vec();
        chosen.sort_unstable();
        let mut slots: Vec<Option<IntentSample>> = std::mem::take(class).into_iter().map(Some).collect();
        out.extend(chosen.into_iter().map(|k| slots[k].take().expect("each index chosen once")));
    }
    out
}

/// Shuffle and split into `(⌊fN⌋, N − ⌊fN⌋)`.
pub fn split(mut samples: Vec<IntentSample>, train_fraction: f64, seed: u64) -> (Vec<IntentSample>, Vec<IntentSample>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    samples.shuffle(&mut rng);
    let n_train = (train_fraction * samples.len() as f64).floor() as usize;
    let test = samples.split_off(n_train);
    (samples, test)
}

/// Generate, balance and split a dataset. Episodes are simulated in
/// parallel and merged in episode order.
pub fn build_intent_dataset(cfg: &DatasetConfig) -> Result<IntentDataset, IntentionError> {
    if cfg.window_ticks < 3 {
        return Err(IntentionError::WindowTooShort { available: cfg.window_ticks });
    }
    if !(0.0..=1.0).contains(&cfg.train_fraction) || !(0.0..=1.0).contains(&cfg.straight_rate) {
        return Err(IntentionError::Config("fractions must lie in [0, 1]".into()));
    }
    let per_episode = par::try_map_range(cfg.episodes, |e| harvest_episode(cfg, e))?;
    let raw: Vec<IntentSample> = per_episode.into_iter().flatten().collect();
    let balanced = balance(raw, cfg.seed ^ 0xBA1A_4CE5);
    let (train, test) = split(balanced, cfg.train_fraction, cfg.seed ^ 0x5B1_17);
    Ok(IntentDataset {
        window_ticks: cfg.window_ticks,
        train,
        test,
    })
}
