//! Training and evaluation pipelines shared by the command line and tests.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{AblationMode, HarnessConfig};
use super::metrics::{compute_metrics, MetricsReport};
use super::HarnessError;
use crate::agent::{train_agent_with, Actor, ActorPolicy, EpisodeStat, Td3, STATE_DIM};
use crate::evolve::{evolve, EvolveResult};
use crate::intention::{build_intent_dataset, train_sta, window_sweep, IntentDataset, StaModel, TrainReport, WindowResult};
use crate::neural::Parameterized;
use crate::par;
use crate::reward::fitness;
use crate::sim::{run_episode, EpisodeOptions, LogDetail};
use crate::world::{EpisodeLog, ScenarioConfig};

/// Independent seed for `(base, tag, index)`.
pub fn derive_seed(base: u64, tag: &str, index: u64) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in tag.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0100_0000_01B3);
    }
    let mut z = base ^ h ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn episode_options(cfg: &HarnessConfig) -> EpisodeOptions {
    EpisodeOptions {
        reward: cfg.reward.clone(),
        detail: LogDetail::Local {
            radius: cfg.experiment.log_radius,
        },
        ..Default::default()
    }
}

/// The balanced, split intention dataset for `seed`.
pub fn build_intent_data(cfg: &HarnessConfig, seed: u64) -> Result<IntentDataset, HarnessError> {
    let mut dcfg = cfg.intent.dataset.clone();
    dcfg.seed = derive_seed(seed, "intent-data", 0);
    Ok(build_intent_dataset(&dcfg)?)
}

/// Build the intention dataset and train the deployed-window model.
pub fn train_intent_model(cfg: &HarnessConfig, seed: u64) -> Result<(StaModel, TrainReport, IntentDataset), HarnessError> {
    let data = build_intent_data(cfg, seed)?;
    let mut tcfg = cfg.intent.train.clone();
    tcfg.seed = derive_seed(seed, "intent-train", 0);
    let (model, report) = train_sta(&data, cfg.intent.window_s * cfg.intent.ticks_per_s, &tcfg)?;
    Ok((model, report, data))
}

/// Train one model per configured window on a shared dataset.
pub fn sweep_windows(cfg: &HarnessConfig, data: &IntentDataset, seed: u64) -> Result<Vec<WindowResult>, HarnessError> {
    let mut tcfg = cfg.intent.train.clone();
    tcfg.seed = derive_seed(seed, "intent-train", 0);
    Ok(window_sweep(data, &cfg.intent.sweep_windows_s, cfg.intent.ticks_per_s, &tcfg)?)
}

/// Greedy evaluation episodes of `actor` on `scenario`, seeded by
/// `(seed, k)`.
pub fn evaluate_actor(
    cfg: &HarnessConfig,
    actor: &Actor,
    intent: Option<Arc<StaModel>>,
    scenario: &ScenarioConfig,
    seed: u64,
    episodes: usize,
) -> Result<Vec<EpisodeLog>, HarnessError> {
    let opts = episode_options(cfg);
    let logs = par::try_map_range(episodes, |k| {
        let sc = ScenarioConfig {
            rng_seed: derive_seed(seed, "eval", k as u64),
            ..scenario.clone()
        };
        let mut policy = ActorPolicy::greedy(actor.clone(), intent.clone());
        run_episode(&sc, &mut policy, &opts)
    })?;
    Ok(logs)
}

/// Mean total fitness of `logs`.
pub fn mean_fitness(cfg: &HarnessConfig, logs: &[EpisodeLog]) -> f64 {
    if logs.is_empty() {
        return 0.0;
    }
    logs.iter()
        .map(|l| fitness(l, &cfg.fitness_weights, cfg.reward.v_ref).total)
        .sum::<f64>()
        / logs.len() as f64
}

/// Mean fitness of greedy episodes on the scenarios seeded by `seeds`.
pub fn score_actor(
    cfg: &HarnessConfig,
    actor: &Actor,
    intent: Option<Arc<StaModel>>,
    seeds: &[u64],
) -> Result<f64, crate::sim::SimError> {
    let opts = episode_options(cfg);
    let scores = par::try_map_range(seeds.len(), |k| {
        let sc = ScenarioConfig {
            rng_seed: seeds[k],
            ..cfg.scenario.clone()
        };
        let mut policy = ActorPolicy::greedy(actor.clone(), intent.clone());
        let log = run_episode(&sc, &mut policy, &opts)?;
        Ok::<_, crate::sim::SimError>(fitness(&log, &cfg.fitness_weights, cfg.reward.v_ref).total)
    })?;
    Ok(scores.iter().sum::<f64>() / seeds.len().max(1) as f64)
}

/// Evolve actor parameters against mean episode fitness. Every genome is
/// scored on the same `episodes_per_eval` scenarios.
pub fn evolve_actor(
    cfg: &HarnessConfig,
    seed: u64,
    intent: Option<Arc<StaModel>>,
) -> Result<(Actor, EvolveResult), HarnessError> {
    let template = Actor::zeros(STATE_DIM, &cfg.td3.hidden);
    let initial: Vec<Vec<f64>> = (0..cfg.ga.population)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "ga-init", i as u64));
            Actor::new(STATE_DIM, &cfg.td3.hidden, &mut rng).params().to_vec()
        })
        .collect();
    let opts = episode_options(cfg);
    let eval_seeds: Vec<u64> = (0..cfg.ga.episodes_per_eval)
        .map(|k| derive_seed(seed, "ga-eval", k as u64))
        .collect();
    let ga = crate::evolve::GaConfig {
        rng_seed: derive_seed(seed, "ga", 0),
        ..cfg.ga.clone()
    };
    let result = evolve(&ga, initial, |genes: &[f64]| {
        let mut actor = template.clone();
        actor.set_params(genes).map_err(|e| e.to_string())?;
        let mut total = 0.0;
        for &s in &eval_seeds {
            let sc = ScenarioConfig {
                rng_seed: s,
                ..cfg.scenario.clone()
            };
            let mut policy = ActorPolicy::greedy(actor.clone(), intent.clone());
            let log = run_episode(&sc, &mut policy, &opts).map_err(|e| e.to_string())?;
            total += fitness(&log, &cfg.fitness_weights, cfg.reward.v_ref).total;
        }
        Ok::<f64, String>(total / eval_seeds.len().max(1) as f64)
    })?;
    let mut actor = template;
    actor.set_params(&result.best.genes)?;
    Ok((actor, result))
}

#[derive(Clone, Debug)]
pub struct TrainedPolicy {
    pub mode: AblationMode,
    pub seed: u64,
    /// Best-scoring checkpoint on the validation scenarios.
    pub actor: Actor,
    /// Actor TD3 started from.
    pub initial_actor: Actor,
    pub ga: Option<EvolveResult>,
    pub curve: Vec<EpisodeStat>,
    /// `(updates, validation fitness)` per checkpoint, starting at 0.
    pub checkpoints: Vec<(usize, f64)>,
    /// Updates of the selected checkpoint.
    pub selected_update: usize,
}

/// Full training path for one mode: optional GA pre-phase, then TD3 from
/// the resulting actor. The returned actor is the checkpoint, the starting
/// actor included, with the best validation fitness.
pub fn train_policy(
    cfg: &HarnessConfig,
    mode: AblationMode,
    seed: u64,
    intent: Option<Arc<StaModel>>,
) -> Result<TrainedPolicy, HarnessError> {
    let intent = if mode.uses_intentions() { intent } else { None };
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "td3-init", 0));
    let (actor, ga) = if mode.uses_evolution() {
        let (a, r) = evolve_actor(cfg, seed, intent.clone())?;
        (a, Some(r))
    } else {
        (Actor::new(STATE_DIM, &cfg.td3.hidden, &mut rng), None)
    };
    let val_seeds: Vec<u64> = (0..cfg.experiment.validation_episodes)
        .map(|k| derive_seed(seed, "val", k as u64))
        .collect();
    let initial_actor = actor.clone();
    let mut best = (score_actor(cfg, &actor, intent.clone(), &val_seeds)?, 0, actor.clone());
    let mut checkpoints = vec![(0, best.0)];
    let mut td3 = Td3::with_actor(actor, cfg.td3.clone(), &mut rng)?;
    let mut acfg = cfg.agent.clone();
    acfg.seed = derive_seed(seed, "td3", 0);
    let curve = train_agent_with(&mut td3, &cfg.scenario, &episode_options(cfg), intent.clone(), &acfg, |t| {
        let score = score_actor(cfg, &t.actor, intent.clone(), &val_seeds)?;
        checkpoints.push((t.updates(), score));
        if score > best.0 {
            best = (score, t.updates(), t.actor.clone());
        }
        Ok(())
    })?;
    let final_score = score_actor(cfg, &td3.actor, intent.clone(), &val_seeds)?;
    if checkpoints.last().map(|c| c.0) != Some(td3.updates()) {
        checkpoints.push((td3.updates(), final_score));
        if final_score > best.0 {
            best = (final_score, td3.updates(), td3.actor.clone());
        }
    }
    Ok(TrainedPolicy {
        mode,
        seed,
        actor: best.2,
        initial_actor,
        ga,
        curve,
        checkpoints,
        selected_update: best.1,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub mode: AblationMode,
    pub seed: u64,
    pub fitness: f64,
    pub metrics: MetricsReport,
}

#[derive(Clone, Debug)]
pub struct AblationOutcome {
    pub rows: Vec<AblationRow>,
    pub policies: Vec<TrainedPolicy>,
}

/// Seed of run `k` under base seed `seed`.
pub fn run_seed(seed: u64, k: usize) -> u64 {
    derive_seed(seed, "run", k as u64)
}

/// Train every configured mode for every seed and evaluate at the
/// configured scenario density. Evaluation scenarios depend only on the
/// seed index, so modes are compared on identical traffic.
pub fn run_ablation(cfg: &HarnessConfig, seed: u64, intent: Option<Arc<StaModel>>) -> Result<AblationOutcome, HarnessError> {
    let jobs: Vec<(AblationMode, usize)> = cfg
        .experiment
        .modes
        .iter()
        .flat_map(|&m| (0..cfg.experiment.seeds).map(move |k| (m, k)))
        .collect();
    let results = par::try_map_range(jobs.len(), |j| {
        let (mode, k) = jobs[j];
        let s = run_seed(seed, k);
        let policy = train_policy(cfg, mode, s, intent.clone())?;
        let eval_intent = if mode.uses_intentions() { intent.clone() } else { None };
        let logs = evaluate_actor(cfg, &policy.actor, eval_intent, &cfg.scenario, s, cfg.experiment.eval_episodes)?;
        let row = AblationRow {
            mode,
            seed: s,
            fitness: mean_fitness(cfg, &logs),
            metrics: compute_metrics(&logs)?,
        };
        Ok::<_, HarnessError>((row, policy))
    })?;
    let (rows, policies) = results.into_iter().unzip();
    Ok(AblationOutcome { rows, policies })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub density: f64,
    pub seed: u64,
    pub metrics: MetricsReport,
}

/// Evaluate trained policies at every configured density.
pub fn run_density_sweep(
    cfg: &HarnessConfig,
    policies: &[(u64, Actor)],
    intent: Option<Arc<StaModel>>,
) -> Result<Vec<DensityRow>, HarnessError> {
    let mut rows = Vec::new();
    for &density in &cfg.experiment.densities {
        let sc = ScenarioConfig {
            density,
            ..cfg.scenario.clone()
        };
        for (seed, actor) in policies {
            let logs = evaluate_actor(cfg, actor, intent.clone(), &sc, *seed, cfg.experiment.eval_episodes)?;
            rows.push(DensityRow {
                density,
                seed: *seed,
                metrics: compute_metrics(&logs)?,
            });
        }
    }
    Ok(rows)
}

/// Per-episode mean and population std of the per-step reward across
/// training runs, truncated to the shortest run.
pub fn reward_bands(curves: &[&[EpisodeStat]]) -> Vec<(usize, f64, f64)> {
    let len = curves.iter().map(|c| c.len()).min().unwrap_or(0);
    (0..len)
        .map(|e| {
            let xs: Vec<f64> = curves.iter().map(|c| c[e].reward / c[e].steps.max(1) as f64).collect();
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            (e, mean, var.sqrt())
        })
        .collect()
}

/// Median of a non-empty sample.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
