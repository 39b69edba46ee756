use std::sync::OnceLock;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rowdrive_core::agent::{ReplayBuffer, Transition, ACTION_DIM};
use rowdrive_core::evolve::{crossover, crossover_at, evolve, mutate, tournament_select, GaConfig, Genome};
use rowdrive_core::harness::compute_metrics;
use rowdrive_core::intention::{StaConfig, StaModel};
use rowdrive_core::neural::soft_update;
use rowdrive_core::reward::{
    comfort_reward, row_reward, safety_reward, speed_reward, FitnessScore, FitnessWeights, RewardWeights,
};
use rowdrive_core::row::{a_row, stopping_distance, RowParams};
use rowdrive_core::sim::{run_episode, EpisodeOptions, IdmEgoPolicy};
use rowdrive_core::world::{build_scenario, EpisodeLog, ScenarioConfig, VehicleState};

/// Upper 1% point of χ² with 9 degrees of freedom.
const CHI2_9DF_P01: f64 = 21.666;

fn chi_square(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    let expected = n as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum()
}

fn transition(r: f64) -> Transition {
    Transition {
        state: vec![r],
        action: [0.0; ACTION_DIM],
        reward: r,
        next_state: vec![r],
        done: false,
    }
}

#[test]
fn replay_sampling_is_uniform() {
    let mut buf = ReplayBuffer::new(10);
    for i in 0..10 {
        buf.push(transition(i as f64));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut counts = [0usize; 10];
    for i in buf.sample_indices(100_000, &mut rng) {
        counts[i] += 1;
    }
    let chi2 = chi_square(&counts);
    assert!(chi2 < CHI2_9DF_P01, "χ² = {chi2}");
}

fn population(fitness: impl Fn(usize) -> f64) -> Vec<Genome> {
    (0..10)
        .map(|i| Genome {
            genes: vec![i as f64],
            fitness: Some(fitness(i)),
        })
        .collect()
}

#[test]
fn tournament_is_uniform_when_fitness_ties() {
    let pop = population(|_| 1.0);
    let cfg = GaConfig {
        population: 10,
        tournament_size: 3,
        ..GaConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut counts = [0usize; 10];
    for _ in 0..10_000 {
        counts[tournament_select(&pop, &cfg, &mut rng)] += 1;
    }
    let chi2 = chi_square(&counts);
    assert!(chi2 < CHI2_9DF_P01, "χ² = {chi2}");
}

#[test]
fn zero_pressure_picks_uniformly_within_the_tournament() {
    let pop = population(|i| i as f64);
    let cfg = GaConfig {
        population: 10,
        tournament_size: 10,
        selection_pressure: 0.0,
        ..GaConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut counts = [0usize; 10];
    for _ in 0..10_000 {
        counts[tournament_select(&pop, &cfg, &mut rng)] += 1;
    }
    let chi2 = chi_square(&counts);
    assert!(chi2 < CHI2_9DF_P01, "χ² = {chi2}");
}

#[test]
fn mutated_fraction_concentrates_at_the_rate() {
    let cfg = GaConfig::default();
    let mut genes = vec![0.0; 1_000_000];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let changed = mutate(&mut genes, &cfg, &mut rng);
    assert_eq!(genes.len(), 1_000_000);
    assert_eq!(changed, genes.iter().filter(|g| **g != 0.0).count());
    let frac = changed as f64 / 1e6;
    assert!((frac - 0.05).abs() <= 0.002, "fraction {frac}");
}

fn genes(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, len)
}

fn parents() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..40).prop_flat_map(|n| (genes(n), genes(n)))
}

fn quadratic(g: &[f64]) -> Result<f64, String> {
    Ok(-g.iter().map(|x| (x - 0.3).powi(2)).sum::<f64>())
}

static LOGS: OnceLock<Vec<EpisodeLog>> = OnceLock::new();

fn logs() -> &'static [EpisodeLog] {
    LOGS.get_or_init(|| {
        (0..4)
            .map(|seed| {
                let cfg = ScenarioConfig {
                    max_ticks: 120,
                    rng_seed: seed,
                    density: 60.0 + 20.0 * seed as f64,
                    ..ScenarioConfig::default()
                };
                run_episode(&cfg, &mut IdmEgoPolicy::new(15.0), &EpisodeOptions::default()).unwrap()
            })
            .collect()
    })
}

fn vehicle() -> impl Strategy<Value = VehicleState> {
    (
        any::<u32>(),
        prop::array::uniform8(-1e4..1e4f64),
        0usize..8,
        (0.5..3.0f64, 1.0..10.0f64),
    )
        .prop_map(|(id, f, lane_index, (width, length))| VehicleState {
            id,
            x: f[0],
            y: f[1],
            v_x: f[2],
            v_y: f[3],
            a_x: f[4],
            a_y: f[5],
            heading: f[6] / 1e4,
            lane_index,
            width,
            length,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn replay_never_exceeds_capacity(cap in 1usize..50, pushes in 0usize..200) {
        let mut buf = ReplayBuffer::new(cap);
        for i in 0..pushes {
            buf.push(transition(i as f64));
            prop_assert!(buf.len() <= cap);
        }
        prop_assert_eq!(buf.len(), pushes.min(cap));
    }

    #[test]
    fn crossover_conserves_genes_at_every_index((a, b) in parents(), seed in any::<u64>()) {
        let cfg = GaConfig { crossover_prob: 1.0, ..GaConfig::default() };
        let (ca, cb) = crossover(&a, &b, &cfg, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(ca.len(), a.len());
        for i in 0..a.len() {
            let mut got = [ca[i], cb[i]];
            let mut want = [a[i], b[i]];
            got.sort_by(f64::total_cmp);
            want.sort_by(f64::total_cmp);
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn cut_point_splits_prefix_and_suffix((a, b) in parents(), k in 1usize..40) {
        let k = k.min(a.len() - 1);
        let (ca, cb) = crossover_at(&a, &b, k);
        prop_assert_eq!(&ca[..k], &a[..k]);
        prop_assert_eq!(&ca[k..], &b[k..]);
        prop_assert_eq!(&cb[..k], &b[..k]);
        prop_assert_eq!(&cb[k..], &a[k..]);
    }

    #[test]
    fn identical_parents_give_identical_children(a in genes(12), seed in any::<u64>()) {
        let cfg = GaConfig { crossover_prob: 1.0, ..GaConfig::default() };
        let (ca, cb) = crossover(&a, &a, &cfg, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(&ca, &a);
        prop_assert_eq!(&cb, &a);
    }

    #[test]
    fn mutation_preserves_length(mut g in genes(30), seed in any::<u64>()) {
        let n = g.len();
        mutate(&mut g, &GaConfig { mutation_prob: 0.5, ..GaConfig::default() }, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(g.len(), n);
    }

    #[test]
    fn soft_update_is_a_convex_combination(
        pair in (1usize..30).prop_flat_map(|n| (genes(n), genes(n))),
        tau in 0.0..=1.0f64,
    ) {
        let (mut target, online) = pair;
        let before = target.clone();
        soft_update(&mut target, &online, tau);
        for ((t, b), o) in target.iter().zip(&before).zip(&online) {
            prop_assert!(*t >= b.min(*o) - 1e-12 && *t <= b.max(*o) + 1e-12);
            prop_assert!((t - (tau * o + (1.0 - tau) * b)).abs() <= 1e-12);
        }
        let mut copy = before;
        soft_update(&mut copy, &online, 1.0);
        prop_assert_eq!(copy, online);
    }

    #[test]
    fn stopping_distance_decreases_in_density(
        v in 0.1..40.0f64,
        rho in 0.0..300.0f64,
        step in 1e-3..100.0f64,
        a_max in 1.0..9.0f64,
    ) {
        let lo = stopping_distance(v, a_max, rho, 0.5).unwrap();
        let hi = stopping_distance(v, a_max, rho + step, 0.5).unwrap();
        prop_assert!(hi < lo);
        let doubled = stopping_distance(2.0 * v, a_max, 0.0, 0.5).unwrap();
        let base = stopping_distance(v, a_max, 0.0, 0.5).unwrap();
        prop_assert!((doubled - 4.0 * base).abs() <= 1e-9 * doubled);
    }

    #[test]
    fn row_region_never_grows_with_density(v in 0.0..30.0f64, rho in 0.0..200.0f64, step in 0.0..100.0f64) {
        let params = RowParams::new(5.0, 0.5).unwrap();
        let state = VehicleState {
            id: 1, x: 50.0, y: 1.75, v_x: v, v_y: 0.0, a_x: 0.0, a_y: 0.0,
            heading: 0.0, lane_index: 0, width: 1.8, length: 4.5,
        };
        prop_assert!(a_row(&state, rho + step, params).area() <= a_row(&state, rho, params).area() + 1e-12);
    }

    #[test]
    fn reward_components_are_penalties(
        history in prop::collection::vec(0.0..40.0f64, 2..12),
        a in -9.0..9.0f64,
        a_prev in -9.0..9.0f64,
        ttc in 0.0..1e3f64,
        delta in 0.0..8.1f64,
        elapsed in 0.0..60.0f64,
    ) {
        let w = RewardWeights::default();
        let r_v = speed_reward(&history, w.v_ref, w.w_v);
        let r_c = comfort_reward(a, a_prev, 1.0, 0.9, w.w_c).unwrap();
        let r_s = safety_reward(ttc, w.w_s);
        let r_d = row_reward(delta, elapsed, w.w_d, w.beta);
        for r in [r_v, r_c, r_s, r_d] {
            prop_assert!(r <= 0.0);
        }
        let v_max = history.iter().copied().fold(0.0, f64::max).max(w.v_ref);
        let bound = -(w.w_v * v_max + w.w_c * 18.0 / 0.1 + w.w_s + 2.0 * w.w_d * 8.1);
        prop_assert!(r_v + r_c + r_s + r_d >= bound - 1e-9);
    }

    #[test]
    fn fitness_is_monotone_in_each_component(
        base in prop::array::uniform4(0.0..=1.0f64),
        bump in 0.0..1.0f64,
        which in 0usize..4,
        raw in prop::array::uniform4(0.01..1.0f64),
    ) {
        let sum: f64 = raw.iter().sum();
        let fw = FitnessWeights::new(raw[0] / sum, raw[1] / sum, raw[2] / sum, 1.0 - (raw[0] + raw[1] + raw[2]) / sum);
        prop_assume!(fw.is_ok());
        let fw = fw.unwrap();
        let mut up = base;
        up[which] += bump;
        let a = FitnessScore::combine(base[0], base[1], base[2], base[3], &fw).total;
        let b = FitnessScore::combine(up[0], up[1], up[2], up[3], &fw).total;
        prop_assert!(b >= a);
    }

    #[test]
    fn attention_weights_are_convex(seed in any::<u64>(), scale in 0.0..50.0f64, len in 1usize..=5) {
        let cfg = StaConfig { regions: 6, region_dim: 4, self_dim: 2, hidden: 5, attention_dim: 3, steps: 5 };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = StaModel::new(cfg, &mut rng);
        let regions: Vec<f64> = (0..24).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
        let h: Vec<f64> = (0..5).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
        let out = model.spatial_attend(&regions, &h);
        prop_assert!(out.weights.iter().all(|w| *w >= 0.0));
        prop_assert!((out.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        let hs: Vec<Vec<f64>> = (0..len)
            .map(|_| (0..5).map(|_| scale * rng.random_range(-1.0..1.0)).collect())
            .collect();
        let (_, w) = model.temporal_attend(&hs);
        prop_assert_eq!(w.len(), len);
        prop_assert!(w.iter().all(|x| *x >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn spatial_attention_follows_region_permutations(seed in any::<u64>(), perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle()) {
        let cfg = StaConfig { regions: 6, region_dim: 4, self_dim: 2, hidden: 5, attention_dim: 3, steps: 5 };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = StaModel::new(cfg, &mut rng);
        let regions: Vec<f64> = (0..24).map(|_| rng.random_range(-2.0..2.0)).collect();
        let h: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let permuted: Vec<f64> = perm.iter().flat_map(|&i| regions[i * 4..(i + 1) * 4].to_vec()).collect();
        let a = model.spatial_attend(&regions, &h);
        let b = model.spatial_attend(&permuted, &h);
        for (k, &i) in perm.iter().enumerate() {
            prop_assert!((b.weights[k] - a.weights[i]).abs() <= 1e-12);
        }
        for (x, y) in a.z.iter().zip(&b.z) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn vehicle_state_json_round_trips(v in vehicle()) {
        let text = serde_json::to_string(&v).unwrap();
        let back: VehicleState = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, v);
        prop_assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn scenario_is_a_function_of_its_config(seed in any::<u64>(), density in 20.0..150.0f64) {
        let cfg = ScenarioConfig { rng_seed: seed, density, ..ScenarioConfig::default() };
        prop_assert_eq!(build_scenario(&cfg).unwrap(), build_scenario(&cfg).unwrap());
    }

    #[test]
    fn elitist_evolution_is_monotone_and_reproducible(seed in any::<u64>(), gens in 1usize..8) {
        let cfg = GaConfig { population: 8, tournament_size: 3, max_generations: gens, rng_seed: seed, ..GaConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init: Vec<Vec<f64>> = (0..8).map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let a = evolve(&cfg, init.clone(), quadratic).unwrap();
        let b = evolve(&cfg, init, quadratic).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.history.len(), gens + 1);
        for w in a.history.windows(2) {
            prop_assert!(w[1].best >= w[0].best);
        }
        prop_assert_eq!(a.best.fitness, Some(a.history.last().unwrap().best));
    }

    #[test]
    fn metrics_ignore_episode_order(order in Just((0..4).collect::<Vec<usize>>()).prop_shuffle()) {
        let logs = logs();
        let shuffled: Vec<EpisodeLog> = order.iter().map(|&i| logs[i].clone()).collect();
        prop_assert_eq!(compute_metrics(logs).unwrap(), compute_metrics(&shuffled).unwrap());
    }
}

#[test]
fn episode_logs_round_trip_byte_exact() {
    for log in logs() {
        let bytes = log.to_jsonl_bytes();
        let back = EpisodeLog::read_jsonl(bytes.as_slice()).unwrap();
        assert_eq!(&back, log);
        assert_eq!(back.to_jsonl_bytes(), bytes);
    }
}

#[test]
fn simulated_ticks_never_reward_speed_comfort_or_safety() {
    for log in logs() {
        for t in &log.ticks {
            let r = &t.reward;
            assert!(r.r_v <= 0.0 && r.r_c <= 0.0 && r.r_s <= 0.0, "tick {}: {r:?}", t.tick);
        }
    }
}
