//! End-to-end acceptance run: one PASS/FAIL line per criterion.
//!
//! `ACCEPTANCE_ONLY=1,2,8` restricts the run to the listed criteria.
//! `ACCEPTANCE_STRICT=1` turns any FAIL into a non-zero exit status.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rowdrive_core::agent::toy::{train_speed_hold, SpeedHoldTask};
use rowdrive_core::agent::{twin_min, Td3Config};
use rowdrive_core::evolve::{evolve, GaConfig};
use rowdrive_core::harness::{
    compute_metrics, median, run_ablation, run_density_sweep, sweep_windows, train_intent_model, AblationMode,
    AblationOutcome, HarnessConfig,
};
use rowdrive_core::intention::{IntentDataset, StaConfig, StaModel};
use rowdrive_core::neural::soft_update;
use rowdrive_core::reward::{decay_factor, safety_reward, terminal_reward, try_speed_reward, TTC_THRESHOLD};
use rowdrive_core::row::{overlap_area, stopping_distance};
use rowdrive_core::world::Outcome;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

#[derive(Default)]
struct Shared {
    intent: Option<(Arc<StaModel>, IntentDataset, f64)>,
    ablation: Option<AblationOutcome>,
}

impl Shared {
    fn intent(&mut self, cfg: &HarnessConfig) -> &(Arc<StaModel>, IntentDataset, f64) {
        self.intent.get_or_insert_with(|| {
            let (model, report, data) = train_intent_model(cfg, 0).expect("intention training");
            (Arc::new(model), data, report.test.accuracy)
        })
    }

    fn ablation(&mut self, cfg: &HarnessConfig) -> &AblationOutcome {
        if self.ablation.is_none() {
            let sta = self.intent(cfg).0.clone();
            self.ablation = Some(run_ablation(cfg, 0, Some(sta)).expect("ablation run"));
        }
        self.ablation.as_ref().unwrap()
    }
}

fn experiment_config() -> HarnessConfig {
    let mut cfg = HarnessConfig::quick();
    cfg.experiment.seeds = 10;
    cfg.scenario.density = 100.0;
    cfg
}

fn geometry() -> Verdict {
    let pairs = common::overlap_pairs(2024, 1000, 0.05);
    let worst = pairs
        .iter()
        .map(|(fp, region, off)| {
            let exact = overlap_area(fp, region);
            (exact - common::grid_overlap(fp, region, 1000, *off)).abs() / exact
        })
        .fold(0.0, f64::max);
    verdict(worst <= 0.01, format!("{} pairs, worst relative error {worst:.2e}", pairs.len()))
}

fn stopping_length() -> Verdict {
    let at_rest = [0.0, 10.0, 150.0].iter().all(|&rho| stopping_distance(0.0, 5.0, rho, 0.5).unwrap() == 0.0);
    let base = stopping_distance(10.0, 5.0, 0.0, 0.5).unwrap();
    let grid: Vec<f64> = (0..100).map(|i| stopping_distance(10.0, 5.0, 2.0 * i as f64, 0.5).unwrap()).collect();
    let decreasing = grid.windows(2).all(|w| w[1] < w[0]);
    verdict(
        at_rest && base == 10.0 && decreasing,
        format!("L(0)=0: {at_rest}, L(10,5,0)={base}, strictly decreasing over 100 densities: {decreasing}"),
    )
}

fn rewards() -> Verdict {
    let terminal = [
        terminal_reward(Some(Outcome::SafeArrived)),
        terminal_reward(Some(Outcome::Collision)),
        terminal_reward(Some(Outcome::WrongLane)),
    ];
    let terminal_ok = terminal == [100.0, -60.0, -40.0];
    let ttcs = [TTC_THRESHOLD, 3.5000001, 4.0, 10.0, 1e3, 1e9, f64::INFINITY, f64::NAN];
    let ws = [0.1, 0.5, 1.0, 2.0, 7.5];
    let safety_ok = ws
        .iter()
        .all(|&w| ttcs.iter().all(|&t| safety_reward(t, w) == 0.0) && safety_reward(0.0, w) == -w);
    let mut factors = Vec::new();
    for i in 0..=40 {
        for j in 0..=30 {
            factors.push(decay_factor(0.05 * i as f64, 0.5 * j as f64));
        }
    }
    let decay_ok = factors.iter().all(|f| *f > 1.0 && *f <= 2.0);
    let r_v = try_speed_reward(&[0.0, 10.0, 10.0], 12.0, 1.0).unwrap();
    let speed_ok = (r_v + 2.0).abs() <= 1e-12;
    verdict(
        terminal_ok && safety_ok && decay_ok && speed_ok,
        format!(
            "terminal {terminal:?}, safety ramp ok: {safety_ok}, {} decay factors in (1, 2]: {decay_ok}, speed hand case {r_v}",
            factors.len()
        ),
    )
}

fn attention() -> Verdict {
    let cfg = StaConfig {
        regions: 8,
        region_dim: 4,
        self_dim: 2,
        hidden: 6,
        attention_dim: 4,
        steps: 10,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    let mut negative = 0;
    let mut inputs = 0;
    for _ in 0..100 {
        let model = StaModel::new(cfg, &mut rng);
        for _ in 0..100 {
            let scale = rng.random_range(0.0..50.0);
            let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect() };
            let regions = draw(cfg.regions * cfg.region_dim);
            let h = draw(cfg.hidden);
            let len = 1 + (h[0].to_bits() % cfg.steps as u64) as usize;
            let hs: Vec<Vec<f64>> = (0..len).map(|_| draw(cfg.hidden)).collect();
            let spatial = model.spatial_attend(&regions, &h).weights;
            let (_, temporal) = model.temporal_attend(&hs);
            for w in [&spatial, &temporal] {
                negative += w.iter().filter(|x| **x < 0.0).count();
                worst = worst.max((w.iter().sum::<f64>() - 1.0).abs());
            }
            inputs += 1;
        }
    }
    let model = StaModel::new(cfg, &mut rng);
    let u = [0.3, -0.7, 1.1, 2.5];
    let regions: Vec<f64> = (0..cfg.regions).flat_map(|_| u).collect();
    let h: Vec<f64> = (0..cfg.hidden).map(|_| rng.random_range(-1.0..1.0)).collect();
    let out = model.spatial_attend(&regions, &h);
    let equal_weights = out.weights.iter().all(|w| *w == out.weights[0]);
    let passes_through = out.z.iter().zip(u).all(|(a, b)| (a - b).abs() <= 1e-12);
    let h1 = vec![0.5, -0.25, 0.125, 1.0, -2.0, 3.0];
    let (c, w) = model.temporal_attend(std::slice::from_ref(&h1));
    let single = w == [1.0] && c == h1;
    verdict(
        negative == 0 && worst <= 1e-9 && equal_weights && passes_through && single,
        format!(
            "{inputs} inputs, max |Σw − 1| = {worst:.1e}, negative weights {negative}; identical regions: {}, T=1: {single}",
            equal_weights && passes_through
        ),
    )
}

fn gradients() -> Verdict {
    let reports = common::all_gradient_checks(5, 25);
    let pass = reports.iter().all(|r| r.passed(20));
    let detail = reports
        .iter()
        .map(|r| format!("{} {}/{:.1e}", r.op, r.checks, r.worst))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(pass, detail)
}

fn td3() -> Verdict {
    let vals = [-3.0, -0.5, 0.0, 0.25, 7.0, f64::MAX];
    let twin = vals.iter().all(|&a| vals.iter().all(|&b| twin_min(a, b) == a.min(b) && twin_min(a, b) == twin_min(b, a)));
    let online = vec![1.0, -2.0, 3.5, 0.125];
    let mut copied = vec![9.0, 9.0, 9.0, 9.0];
    soft_update(&mut copied, &online, 1.0);
    let mut frozen = vec![9.0, 8.0, 7.0, 6.0];
    soft_update(&mut frozen, &online, 0.0);
    let mut mixed = vec![0.0; 4];
    soft_update(&mut mixed, &online, 0.25);
    let soft = copied == online
        && frozen == [9.0, 8.0, 7.0, 6.0]
        && mixed.iter().zip(&online).all(|(m, o)| (m - 0.25 * o).abs() <= 1e-15);
    let task = SpeedHoldTask::default();
    let ratios: Vec<f64> = (0..3)
        .map(|seed| {
            let run = train_speed_hold(&task, Td3Config::default(), 5000, 500, seed).expect("toy training");
            run.evaluations.last().map(|e| e.1).unwrap_or(f64::NEG_INFINITY)
        })
        .collect();
    let solved = ratios.iter().filter(|r| **r >= 0.9).count();
    verdict(
        twin && soft && solved == 3,
        format!("twin-min: {twin}, soft update: {soft}, toy return/optimum after 5000 updates {ratios:.3?}"),
    )
}

fn ga() -> Verdict {
    let dim = 10;
    let mut monotone = true;
    let mut dists = Vec::new();
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let target: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.5..0.5)).collect();
        let init: Vec<Vec<f64>> = (0..50).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let cfg = GaConfig {
            rng_seed: seed,
            ..GaConfig::default()
        };
        let run = evolve(&cfg, init, |g: &[f64]| {
            Ok::<f64, String>(-g.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        })
        .expect("GA run");
        monotone &= run.history.windows(2).all(|w| w[1].best >= w[0].best);
        let d = run.best.genes.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        dists.push(d);
    }
    let hits = dists.iter().filter(|d| **d <= 0.05).count();
    verdict(
        monotone && hits >= 9,
        format!("monotone best fitness: {monotone}, {hits}/10 seeds within 0.05, distances {dists:.3?}"),
    )
}

fn metrics_oracle() -> Verdict {
    let m = compute_metrics(&[common::hand::hand_episode()]).expect("metrics");
    let pass = m.min_thw == Some(5.5 / 8.0)
        && m.avg_velocity == 32.0 / 3.0
        && m.avg_yaw_rate == 0.5
        && m.avg_lane_changes == 1.0
        && m.avg_row_violations == 2.0;
    verdict(
        pass,
        format!(
            "min THW {:?}, avg velocity {}, yaw rate {}, lane changes {}, ROW violations {}",
            m.min_thw, m.avg_velocity, m.avg_yaw_rate, m.avg_lane_changes, m.avg_row_violations
        ),
    )
}

fn intention(shared: &mut Shared) -> Verdict {
    let cfg = experiment_config();
    let (_, data, accuracy) = shared.intent(&cfg);
    let accuracy = *accuracy;
    let sweep = sweep_windows(&cfg, data, 0).expect("window sweep");
    let windows: Vec<usize> = sweep.iter().map(|r| r.window_s).collect();
    let complete = windows == (1..=8).collect::<Vec<_>>()
        && sweep.iter().all(|r| {
            let m = &r.metrics;
            [m.accuracy, m.precision, m.recall, m.f1].iter().all(|x| x.is_finite())
        });
    let table = sweep
        .iter()
        .map(|r| format!("{}s:{:.3}", r.window_s, r.metrics.accuracy))
        .collect::<Vec<_>>()
        .join(" ");
    verdict(
        accuracy >= 0.9 && complete,
        format!("4 s test accuracy {accuracy:.3}; sweep complete: {complete} ({table})"),
    )
}

fn medians_by_mode(out: &AblationOutcome, f: impl Fn(&rowdrive_core::harness::AblationRow) -> f64) -> BTreeMap<AblationMode, f64> {
    AblationMode::ALL
        .iter()
        .map(|&m| {
            let v: Vec<f64> = out.rows.iter().filter(|r| r.mode == m).map(&f).collect();
            (m, median(&v))
        })
        .collect()
}

fn ablation(shared: &mut Shared) -> Verdict {
    let cfg = experiment_config();
    let out = shared.ablation(&cfg);
    let fit = medians_by_mode(out, |r| r.fitness);
    let vel = medians_by_mode(out, |r| r.metrics.avg_velocity);
    use AblationMode::*;
    let order = fit[&Full] > fit[&NoSituationAwareness] && fit[&Full] > fit[&NoEvolution];
    let faster = vel[&Full] > vel[&NoSituationAwareness] && vel[&Full] > vel[&NoEvolution];
    verdict(
        order && faster,
        format!(
            "{} seeds, median fitness full {:.4} / no-SA {:.4} / no-evo {:.4}; median velocity {:.3} / {:.3} / {:.3}",
            cfg.experiment.seeds,
            fit[&Full],
            fit[&NoSituationAwareness],
            fit[&NoEvolution],
            vel[&Full],
            vel[&NoSituationAwareness],
            vel[&NoEvolution]
        ),
    )
}

fn density(shared: &mut Shared) -> Verdict {
    let cfg = experiment_config();
    let sta = shared.intent(&cfg).0.clone();
    let full: Vec<_> = shared
        .ablation(&cfg)
        .policies
        .iter()
        .filter(|p| p.mode == AblationMode::Full)
        .map(|p| (p.seed, p.actor.clone()))
        .collect();
    let rows = run_density_sweep(&cfg, &full, Some(sta)).expect("density sweep");
    let mut vel = Vec::new();
    let mut thw = Vec::new();
    for &d in &cfg.experiment.densities {
        let at: Vec<_> = rows.iter().filter(|r| r.density == d).collect();
        vel.push(median(&at.iter().map(|r| r.metrics.avg_velocity).collect::<Vec<_>>()));
        thw.push(median(&at.iter().filter_map(|r| r.metrics.min_thw).collect::<Vec<_>>()));
    }
    let non_increasing = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0]);
    verdict(
        non_increasing(&vel) && non_increasing(&thw),
        format!("densities {:?}: median velocity {vel:.3?}, median min THW {thw:.3?}", cfg.experiment.densities),
    )
}

const RERUN_CONFIG: &str = r#"
[scenario]
max_ticks = 60

[intent]
window_s = 2
sweep_windows_s = [1, 2]

[intent.dataset]
episodes = 3

[intent.dataset.scenario]
max_ticks = 300

[intent.train]
epochs = 1

[experiment]
simulate_episodes = 2
eval_episodes = 2
validation_episodes = 1
seeds = 1

[ga]
population = 4
tournament_size = 2
max_generations = 2
episodes_per_eval = 1

[agent]
episodes = 3
max_updates = 20
warmup_steps = 40
checkpoint_every = 10

[td3]
batch_size = 16
buffer_capacity = 1000
hidden = [8, 8]
"#;

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).expect("readable output") {
            let p = e.expect("dir entry").path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let bytes = std::fs::read(&p).expect("readable file");
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), bytes));
            }
        }
    }
    out.sort();
    out
}

fn cli_runs(root: &Path, config: &Path) -> Result<(), String> {
    let p = |s: &str| root.join(s).display().to_string();
    let steps: Vec<Vec<String>> = vec![
        vec!["simulate".into()],
        vec!["train-intent".into()],
        vec!["sweep-window".into()],
        vec!["train-agent".into(), "--intent-model".into(), p("train-intent/intent_model")],
        vec!["evolve".into(), "--intent-model".into(), p("train-intent/intent_model")],
        vec!["simulate".into(), "--actor".into(), p("evolve/actor"), "--intent-model".into(), p("train-intent/intent_model")],
        vec!["run-ablation".into()],
        vec!["sweep-density".into(), "--from".into(), p("run-ablation")],
        vec!["metrics".into(), "--logs".into(), p("simulate/episodes")],
        vec!["replay".into(), "--episode".into(), p("simulate/episodes/episode_0000.jsonl")],
    ];
    for (i, step) in steps.iter().enumerate() {
        let name = if i == 5 { "simulate-actor".to_string() } else { step[0].clone() };
        let status = Command::new(env!("CARGO_BIN_EXE_rowdrive"))
            .args(["--config", config.to_str().unwrap(), "--seed", "3", "--out", &p(&name)])
            .args(step)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("{name} failed: {}", String::from_utf8_lossy(&status.stderr)));
        }
    }
    Ok(())
}

fn determinism() -> Verdict {
    let base = std::env::temp_dir().join(format!("rowdrive-acceptance-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&base);
    std::fs::create_dir_all(&base).unwrap();
    let config = base.join("rerun.toml");
    std::fs::write(&config, RERUN_CONFIG).unwrap();
    let (a, b) = (base.join("a"), base.join("b"));
    if let Err(e) = cli_runs(&a, &config).and_then(|_| cli_runs(&b, &config)) {
        return verdict(false, e);
    }
    let (ta, tb) = (tree(&a), tree(&b));
    let differing: Vec<String> = ta
        .iter()
        .zip(&tb)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.display().to_string())
        .collect();
    let commands: BTreeSet<String> = ta
        .iter()
        .filter_map(|(p, _)| p.components().next().map(|c| c.as_os_str().to_string_lossy().into_owned()))
        .collect();
    let same = ta.len() == tb.len() && differing.is_empty();
    let _ = std::fs::remove_dir_all(&base);
    verdict(
        same,
        format!(
            "{} files from {} runs byte-identical: {same}{}",
            ta.len(),
            commands.len(),
            if differing.is_empty() { String::new() } else { format!(" (differ: {differing:?})") }
        ),
    )
}

fn main() {
    let only: Option<BTreeSet<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut shared = Shared::default();
    let mut results = Vec::new();

    type Check = Box<dyn Fn(&mut Shared) -> Verdict>;
    let criteria: Vec<(usize, &str, Option<f64>, Check)> = vec![
        (1, "geometry oracle", Some(30.0), Box::new(|_| geometry())),
        (2, "stopping length", None, Box::new(|_| stopping_length())),
        (3, "reward terms", None, Box::new(|_| rewards())),
        (4, "attention convexity", None, Box::new(|_| attention())),
        (5, "gradient checks", Some(120.0), Box::new(|_| gradients())),
        (6, "TD3 sanity", Some(600.0), Box::new(|_| td3())),
        (7, "GA certificate", Some(300.0), Box::new(|_| ga())),
        (8, "metrics oracle", None, Box::new(|_| metrics_oracle())),
        (9, "intention pipeline", Some(1800.0), Box::new(intention)),
        (10, "ablation trend", Some(7200.0), Box::new(ablation)),
        (11, "density trend", None, Box::new(density)),
        (12, "CLI determinism", None, Box::new(|_| determinism())),
    ];

    for (n, title, limit, check) in &criteria {
        if only.as_ref().is_some_and(|o| !o.contains(n)) {
            continue;
        }
        let t = Instant::now();
        let v = check(&mut shared);
        let secs = t.elapsed().as_secs_f64();
        let in_time = limit.is_none_or(|l| secs < l);
        let pass = v.pass && in_time;
        let budget = limit.map(|l| format!(" of {l:.0}s")).unwrap_or_default();
        println!(
            "criterion {n:>2} {} {title}: {} [{secs:.1}s{budget}]",
            if pass { "PASS" } else { "FAIL" },
            v.detail
        );
        results.push(pass);
    }
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if strict && passed < results.len() {
        std::process::exit(1);
    }
}
