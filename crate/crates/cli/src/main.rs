use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use rowdrive_core::agent::{Actor, ActorPolicy, EpisodeStat, STATE_DIM};
use rowdrive_core::evolve::EvolveResult;
use rowdrive_core::harness::{
    build_intent_data, cell, compute_metrics, derive_seed, episode_options, evaluate_actor, evolve_actor, line_chart_svg,
    mean_fitness, median, reward_bands, run_ablation, run_density_sweep, run_seed, sweep_windows, tick_series,
    train_intent_model, train_policy, AblationMode, HarnessConfig, HarnessError, MetricsReport, RunDir, Series, Table,
    TickMetrics,
};
use rowdrive_core::intention::{ClassificationMetrics, StaConfig, StaModel, TrainReport};
use rowdrive_core::neural::checkpoint;
use rowdrive_core::par;
use rowdrive_core::sim::{run_episode, DecisionPolicy, IdmEgoPolicy, ScriptedPolicy};
use rowdrive_core::world::{EpisodeLog, ScenarioConfig};

#[derive(Parser, Debug)]
#[command(name = "rowdrive", version, about = "Right-of-way aware driving experiments")]
struct Cli {
    /// TOML config file. Keys it omits take the quick-profile values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Built-in profile used when no config file is given: quick or reference.
    #[arg(long, global = true, default_value = "quick")]
    profile: String,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run episodes and write their logs.
    Simulate {
        /// Actor checkpoint stem to drive the ego; the IDM follower otherwise.
        #[arg(long)]
        actor: Option<PathBuf>,
        /// Intention model checkpoint stem for the actor's state.
        #[arg(long)]
        intent_model: Option<PathBuf>,
    },
    /// Build the intention dataset and train the deployed window.
    TrainIntent,
    /// Train one intention model per look-back window.
    SweepWindow,
    /// GA pre-phase (unless disabled by the mode) followed by TD3.
    TrainAgent {
        #[arg(long, value_enum, default_value = "full")]
        mode: Mode,
        #[arg(long)]
        intent_model: Option<PathBuf>,
    },
    /// Evolve actor weights only.
    Evolve {
        #[arg(long, value_enum, default_value = "full")]
        mode: Mode,
        #[arg(long)]
        intent_model: Option<PathBuf>,
    },
    /// Train and evaluate every configured mode over every seed.
    RunAblation,
    /// Evaluate trained Full policies at every configured density.
    SweepDensity {
        /// A `run-ablation` output directory to take the Full policies from.
        #[arg(long)]
        from: Option<PathBuf>,
    },
    /// Summarize every episode log under a directory.
    Metrics {
        #[arg(long)]
        logs: PathBuf,
    },
    /// Re-run a logged episode from its recorded commands and compare.
    Replay {
        #[arg(long)]
        episode: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Full,
    NoSituationAwareness,
    NoEvolution,
}

impl From<Mode> for AblationMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Full => AblationMode::Full,
            Mode::NoSituationAwareness => AblationMode::NoSituationAwareness,
            Mode::NoEvolution => AblationMode::NoEvolution,
        }
    }
}

const ACTOR_KIND: &str = "actor";
const STA_KIND: &str = "sta";
const INTENT_STEM: &str = "intent_model";

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli) -> Result<HarnessConfig, HarnessError> {
    match &cli.config {
        Some(path) => HarnessConfig::load(path),
        None => HarnessConfig::profile(&cli.profile).ok_or_else(|| HarnessError::Config {
            path: "--profile".into(),
            message: format!("unknown profile {:?}, expected quick or reference", cli.profile),
        }),
    }
}

fn run(cli: &Cli) -> Result<(), HarnessError> {
    let cfg = load_config(cli)?;
    if let Some(jobs) = cli.jobs {
        par::configure_threads(jobs);
    }
    let seed = cli.seed;
    let mut out = RunDir::create(&cli.out)?;
    out.write_text("config.toml", &cfg.to_toml())?;
    let name = match &cli.command {
        Command::Simulate { actor, intent_model } => {
            simulate(&cfg, seed, actor.as_deref(), intent_model.as_deref(), &mut out)?;
            "simulate"
        }
        Command::TrainIntent => {
            let (model, report, data) = train_intent_model(&cfg, seed)?;
            save_model(&mut out, INTENT_STEM, STA_KIND, &model)?;
            write_intent_report(&mut out, &report, &data)?;
            println!("test accuracy {:.4}", report.test.accuracy);
            "train-intent"
        }
        Command::SweepWindow => {
            let data = build_intent_data(&cfg, seed)?;
            let rows = sweep_windows(&cfg, &data, seed)?;
            let mut t = Table::new(&["window_s", "precision", "recall", "f1", "accuracy"]);
            for r in &rows {
                let mut row = vec![r.window_s.to_string()];
                row.extend(classification_cells(&r.metrics));
                t.push(row);
            }
            out.write_csv("window_sweep.csv", &t)?;
            let pts = |f: fn(&ClassificationMetrics) -> f64| rows.iter().map(|r| (r.window_s as f64, f(&r.metrics))).collect();
            let svg = line_chart_svg(
                "Intention accuracy by look-back window",
                "window (s)",
                "score",
                &[
                    Series { name: "accuracy".into(), points: pts(|m| m.accuracy), band: None },
                    Series { name: "f1".into(), points: pts(|m| m.f1), band: None },
                ],
            );
            out.write_text("window_sweep.svg", &svg)?;
            "sweep-window"
        }
        Command::TrainAgent { mode, intent_model } => {
            let mode = AblationMode::from(*mode);
            let intent = intent_for(&cfg, seed, mode, intent_model.as_deref(), &mut out)?;
            let policy = train_policy(&cfg, mode, seed, intent.clone())?;
            save_model(&mut out, "actor", ACTOR_KIND, &policy.actor)?;
            out.write_csv("training_curve.csv", &curve_table(&policy.curve))?;
            let mut ck = Table::new(&["updates", "validation_fitness", "selected"]);
            for &(u, f) in &policy.checkpoints {
                ck.push(vec![u.to_string(), cell(Some(f)), (u == policy.selected_update).to_string()]);
            }
            out.write_csv("checkpoints.csv", &ck)?;
            if let Some(ga) = &policy.ga {
                write_ga(&mut out, ga)?;
            }
            let bands = reward_bands(&[&policy.curve]);
            let svg = line_chart_svg("Training reward", "episode", "reward per step", &[Series {
                name: mode.name().into(),
                points: bands.iter().map(|&(e, m, _)| (e as f64, m)).collect(),
                band: None,
            }]);
            out.write_text("training_curve.svg", &svg)?;
            let eval_intent = if mode.uses_intentions() { intent } else { None };
            let logs = evaluate_actor(&cfg, &policy.actor, eval_intent, &cfg.scenario, seed, cfg.experiment.eval_episodes)?;
            let mut t = metrics_table(&["fitness"]);
            t.push(metrics_row(vec![cell(Some(mean_fitness(&cfg, &logs)))], &compute_metrics(&logs)?));
            out.write_csv("metrics.csv", &t)?;
            "train-agent"
        }
        Command::Evolve { mode, intent_model } => {
            let mode = AblationMode::from(*mode);
            let intent = intent_for(&cfg, seed, mode, intent_model.as_deref(), &mut out)?;
            let (actor, result) = evolve_actor(&cfg, seed, intent)?;
            save_model(&mut out, "actor", ACTOR_KIND, &actor)?;
            write_ga(&mut out, &result)?;
            println!("best fitness {:.6}", result.best.fitness.unwrap_or(f64::NAN));
            "evolve"
        }
        Command::RunAblation => {
            ablation(&cfg, seed, &mut out)?;
            "run-ablation"
        }
        Command::SweepDensity { from } => {
            density(&cfg, seed, from.as_deref(), &mut out)?;
            "sweep-density"
        }
        Command::Metrics { logs } => {
            let files = jsonl_files(logs)?;
            if files.is_empty() {
                return Err(HarnessError::EmptyInput);
            }
            let mut per = Table::new(&["file", "outcome", "ticks", "fitness"]);
            let mut all = Vec::with_capacity(files.len());
            for f in &files {
                let log = read_log(f)?;
                let rel = f.strip_prefix(logs).unwrap_or(f).display().to_string();
                let fit = rowdrive_core::reward::fitness(&log, &cfg.fitness_weights, cfg.reward.v_ref).total;
                per.push(vec![rel, format!("{:?}", log.outcome), log.ticks.len().to_string(), cell(Some(fit))]);
                all.push(log);
            }
            let mut t = metrics_table(&[]);
            t.push(metrics_row(vec![], &compute_metrics(&all)?));
            out.write_csv("metrics.csv", &t)?;
            out.write_csv("episodes.csv", &per)?;
            "metrics"
        }
        Command::Replay { episode } => {
            let log = read_log(episode)?;
            let mut policy = ScriptedPolicy::from_log(&log);
            let again = run_episode(&log.scenario, &mut policy, &episode_options(&cfg))?;
            let (a, b) = (tick_series(&log), tick_series(&again));
            out.write_csv("replay_ticks.csv", &tick_table(&b))?;
            if let Some(k) = (0..a.len().max(b.len())).find(|&k| a.get(k) != b.get(k)) {
                return Err(HarnessError::Format(format!(
                    "replay of {} diverges at tick index {k}",
                    episode.display()
                )));
            }
            println!("replay identical over {} ticks", b.len());
            "replay"
        }
    };
    let manifest = out.finish(name, seed, &cfg.hash(seed))?;
    println!("wrote {} files to {}", manifest.files.len() + 1, cli.out.display());
    Ok(())
}

fn simulate(
    cfg: &HarnessConfig,
    seed: u64,
    actor: Option<&Path>,
    intent_model: Option<&Path>,
    out: &mut RunDir,
) -> Result<(), HarnessError> {
    let actor = actor.map(|p| load_actor(cfg, p)).transpose()?;
    let intent = intent_model.map(|p| load_intent(cfg, p)).transpose()?.map(Arc::new);
    let opts = episode_options(cfg);
    let logs = par::try_map_range(cfg.experiment.simulate_episodes, |k| {
        let sc = ScenarioConfig {
            rng_seed: derive_seed(seed, "simulate", k as u64),
            ..cfg.scenario.clone()
        };
        let mut policy: Box<dyn DecisionPolicy> = match &actor {
            Some(a) => Box::new(ActorPolicy::greedy(a.clone(), intent.clone())),
            None => Box::new(IdmEgoPolicy::new(cfg.reward.v_ref)),
        };
        run_episode(&sc, policy.as_mut(), &opts)
    })?;
    for (k, log) in logs.iter().enumerate() {
        out.write_bytes(&format!("episodes/episode_{k:04}.jsonl"), &log.to_jsonl_bytes())?;
        out.write_csv(&format!("episodes/episode_{k:04}_ticks.csv"), &tick_table(&tick_series(log)))?;
    }
    let mut t = metrics_table(&["fitness"]);
    t.push(metrics_row(vec![cell(Some(mean_fitness(cfg, &logs)))], &compute_metrics(&logs)?));
    out.write_csv("metrics.csv", &t)?;
    Ok(())
}

fn ablation(cfg: &HarnessConfig, seed: u64, out: &mut RunDir) -> Result<(), HarnessError> {
    let needs_intent = cfg.experiment.modes.iter().any(|m| m.uses_intentions());
    let intent = if needs_intent {
        let (model, report, _) = train_intent_model(cfg, seed)?;
        save_model(out, INTENT_STEM, STA_KIND, &model)?;
        println!("intention test accuracy {:.4}", report.test.accuracy);
        Some(Arc::new(model))
    } else {
        None
    };
    let outcome = run_ablation(cfg, seed, intent)?;
    let mut rows = metrics_table(&["mode", "seed", "fitness"]);
    for r in &outcome.rows {
        rows.push(metrics_row(vec![r.mode.name().into(), r.seed.to_string(), cell(Some(r.fitness))], &r.metrics));
    }
    out.write_csv("ablation.csv", &rows)?;
    let mut summary = Table::new(&[
        "mode",
        "seeds",
        "median_fitness",
        "median_avg_velocity",
        "median_avg_acceleration",
        "median_avg_yaw_rate",
        "median_min_thw",
        "median_avg_row_violations",
        "median_avg_lane_changes",
    ]);
    let mut index = Table::new(&["mode", "k", "seed", "stem", "selected_update"]);
    let mut series = Vec::new();
    let mut band_rows = Table::new(&["mode", "episode", "mean_reward_per_step", "std"]);
    for &mode in &cfg.experiment.modes {
        let rs: Vec<_> = outcome.rows.iter().filter(|r| r.mode == mode).collect();
        let med = |f: &dyn Fn(&MetricsReport) -> Option<f64>| {
            let v: Vec<f64> = rs.iter().filter_map(|r| f(&r.metrics)).collect();
            if v.is_empty() { None } else { Some(median(&v)) }
        };
        summary.push(vec![
            mode.name().into(),
            rs.len().to_string(),
            cell(Some(median(&rs.iter().map(|r| r.fitness).collect::<Vec<_>>()))),
            cell(med(&|m| Some(m.avg_velocity))),
            cell(med(&|m| Some(m.avg_acceleration))),
            cell(med(&|m| Some(m.avg_yaw_rate))),
            cell(med(&|m| m.min_thw)),
            cell(med(&|m| Some(m.avg_row_violations))),
            cell(med(&|m| Some(m.avg_lane_changes))),
        ]);
        let ps: Vec<_> = outcome.policies.iter().filter(|p| p.mode == mode).collect();
        for (k, p) in ps.iter().enumerate() {
            let stem = format!("policies/{}_{k:02}", mode.name());
            save_model(out, &stem, ACTOR_KIND, &p.actor)?;
            index.push(vec![mode.name().into(), k.to_string(), p.seed.to_string(), stem, p.selected_update.to_string()]);
        }
        let curves: Vec<&[EpisodeStat]> = ps.iter().map(|p| p.curve.as_slice()).collect();
        let bands = reward_bands(&curves);
        for &(e, m, s) in &bands {
            band_rows.push(vec![mode.name().into(), e.to_string(), cell(Some(m)), cell(Some(s))]);
        }
        series.push(Series {
            name: mode.name().into(),
            points: bands.iter().map(|&(e, m, _)| (e as f64, m)).collect(),
            band: Some(bands.iter().map(|b| b.2).collect()),
        });
    }
    out.write_csv("ablation_summary.csv", &summary)?;
    out.write_csv("policies/index.csv", &index)?;
    out.write_csv("reward_curves.csv", &band_rows)?;
    out.write_text(
        "reward_curves.svg",
        &line_chart_svg("Training reward, mean ± std over seeds", "episode", "reward per step", &series),
    )?;
    Ok(())
}

fn density(cfg: &HarnessConfig, seed: u64, from: Option<&Path>, out: &mut RunDir) -> Result<(), HarnessError> {
    let (intent, policies) = match from {
        Some(dir) => {
            let intent = load_intent(cfg, &dir.join(INTENT_STEM))?;
            let index = dir.join("policies/index.csv");
            let mut reader = csv::Reader::from_path(&index).map_err(|e| HarnessError::Format(format!("{}: {e}", index.display())))?;
            let mut policies = Vec::new();
            for rec in reader.records() {
                let rec = rec.map_err(|e| HarnessError::Format(format!("{}: {e}", index.display())))?;
                if &rec[0] != AblationMode::Full.name() {
                    continue;
                }
                let s: u64 = rec[2].parse().map_err(|e| HarnessError::Format(format!("{}: seed: {e}", index.display())))?;
                policies.push((s, load_actor(cfg, &dir.join(&rec[3]))?));
            }
            if policies.is_empty() {
                return Err(HarnessError::Format(format!("{} lists no full policies", index.display())));
            }
            (intent, policies)
        }
        None => {
            let (model, _, _) = train_intent_model(cfg, seed)?;
            save_model(out, INTENT_STEM, STA_KIND, &model)?;
            let model = Arc::new(model);
            let trained = par::try_map_range(cfg.experiment.seeds, |k| {
                let s = run_seed(seed, k);
                train_policy(cfg, AblationMode::Full, s, Some(model.clone())).map(|p| (s, p.actor))
            })?;
            for (k, (_, a)) in trained.iter().enumerate() {
                save_model(out, &format!("policies/full_{k:02}"), ACTOR_KIND, a)?;
            }
            (Arc::try_unwrap(model).unwrap_or_else(|m| (*m).clone()), trained)
        }
    };
    let rows = run_density_sweep(cfg, &policies, Some(Arc::new(intent)))?;
    let mut t = metrics_table(&["density", "seed"]);
    for r in &rows {
        t.push(metrics_row(vec![cell(Some(r.density)), r.seed.to_string()], &r.metrics));
    }
    out.write_csv("density.csv", &t)?;
    let mut summary = Table::new(&["density", "median_avg_velocity", "median_min_thw", "median_avg_acceleration", "median_avg_yaw_rate", "median_avg_row_violations", "median_avg_lane_changes"]);
    let mut vel = Vec::new();
    let mut thw = Vec::new();
    for &d in &cfg.experiment.densities {
        let rs: Vec<&MetricsReport> = rows.iter().filter(|r| r.density == d).map(|r| &r.metrics).collect();
        let med = |f: &dyn Fn(&MetricsReport) -> Option<f64>| {
            let v: Vec<f64> = rs.iter().filter_map(|m| f(m)).collect();
            if v.is_empty() { None } else { Some(median(&v)) }
        };
        let v = med(&|m| Some(m.avg_velocity));
        let h = med(&|m| m.min_thw);
        vel.extend(v.map(|v| (d, v)));
        thw.extend(h.map(|h| (d, h)));
        summary.push(vec![
            cell(Some(d)),
            cell(v),
            cell(h),
            cell(med(&|m| Some(m.avg_acceleration))),
            cell(med(&|m| Some(m.avg_yaw_rate))),
            cell(med(&|m| Some(m.avg_row_violations))),
            cell(med(&|m| Some(m.avg_lane_changes))),
        ]);
    }
    out.write_csv("density_summary.csv", &summary)?;
    out.write_text(
        "density.svg",
        &line_chart_svg("Full model across traffic densities", "density (veh/km)", "median", &[
            Series { name: "avg velocity (m/s)".into(), points: vel, band: None },
            Series { name: "min THW (s)".into(), points: thw, band: None },
        ]),
    )?;
    Ok(())
}

fn intent_for(
    cfg: &HarnessConfig,
    seed: u64,
    mode: AblationMode,
    stem: Option<&Path>,
    out: &mut RunDir,
) -> Result<Option<Arc<StaModel>>, HarnessError> {
    if !mode.uses_intentions() {
        return Ok(None);
    }
    let model = match stem {
        Some(p) => load_intent(cfg, p)?,
        None => {
            let (model, report, _) = train_intent_model(cfg, seed)?;
            save_model(out, INTENT_STEM, STA_KIND, &model)?;
            println!("intention test accuracy {:.4}", report.test.accuracy);
            model
        }
    };
    Ok(Some(Arc::new(model)))
}

fn save_model<M: rowdrive_core::neural::Parameterized>(
    out: &mut RunDir,
    stem: &str,
    kind: &str,
    model: &M,
) -> Result<(), HarnessError> {
    let path = out.path(stem);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| HarnessError::Io {
            path: parent.display().to_string(),
            source: e,
        })?;
    }
    checkpoint::save(&path, kind, model)?;
    out.register(&format!("{stem}.bin"))?;
    out.register(&format!("{stem}.json"))
}

fn load_actor(cfg: &HarnessConfig, stem: &Path) -> Result<Actor, HarnessError> {
    let mut actor = Actor::zeros(STATE_DIM, &cfg.td3.hidden);
    checkpoint::load(stem, ACTOR_KIND, &mut actor)?;
    Ok(actor)
}

fn load_intent(cfg: &HarnessConfig, stem: &Path) -> Result<StaModel, HarnessError> {
    let mut model = StaModel::zeros(StaConfig::for_steps(cfg.intent.window_s * cfg.intent.ticks_per_s));
    checkpoint::load(stem, STA_KIND, &mut model)?;
    Ok(model)
}

fn read_log(path: &Path) -> Result<EpisodeLog, HarnessError> {
    let file = std::fs::File::open(path).map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    EpisodeLog::read_jsonl(BufReader::new(file)).map_err(|e| HarnessError::Format(format!("{}: {e}", path.display())))
}

/// Every `.jsonl` file under `dir`, sorted by path.
fn jsonl_files(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let mut found = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let entries = std::fs::read_dir(&d).map_err(|e| HarnessError::Io {
            path: d.display().to_string(),
            source: e,
        })?;
        for entry in entries {
            let p = entry
                .map_err(|e| HarnessError::Io {
                    path: d.display().to_string(),
                    source: e,
                })?
                .path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "jsonl") {
                found.push(p);
            }
        }
    }
    found.sort();
    Ok(found)
}

const METRIC_COLUMNS: [&str; 7] = [
    "episodes",
    "avg_velocity",
    "avg_acceleration",
    "avg_yaw_rate",
    "min_thw",
    "avg_row_violations",
    "avg_lane_changes",
];

fn metrics_table(leading: &[&str]) -> Table {
    let header: Vec<&str> = leading.iter().copied().chain(METRIC_COLUMNS).collect();
    Table::new(&header)
}

fn metrics_row(mut leading: Vec<String>, m: &MetricsReport) -> Vec<String> {
    leading.extend([
        m.episodes.to_string(),
        cell(Some(m.avg_velocity)),
        cell(Some(m.avg_acceleration)),
        cell(Some(m.avg_yaw_rate)),
        cell(m.min_thw),
        cell(Some(m.avg_row_violations)),
        cell(Some(m.avg_lane_changes)),
    ]);
    leading
}

fn tick_table(series: &[TickMetrics]) -> Table {
    let mut t = Table::new(&["tick", "speed", "accel", "yaw_rate", "thw", "reward"]);
    for m in series {
        t.push(vec![
            m.tick.to_string(),
            cell(Some(m.speed)),
            cell(Some(m.accel)),
            cell(Some(m.yaw_rate)),
            cell(m.thw),
            cell(Some(m.reward)),
        ]);
    }
    t
}

fn curve_table(curve: &[EpisodeStat]) -> Table {
    let mut t = Table::new(&["episode", "steps", "reward", "success", "outcome", "updates"]);
    for e in curve {
        t.push(vec![
            e.episode.to_string(),
            e.steps.to_string(),
            cell(Some(e.reward)),
            u8::from(e.success()).to_string(),
            format!("{:?}", e.outcome),
            e.updates.to_string(),
        ]);
    }
    t
}

fn classification_cells(m: &ClassificationMetrics) -> Vec<String> {
    vec![cell(Some(m.precision)), cell(Some(m.recall)), cell(Some(m.f1)), cell(Some(m.accuracy))]
}

fn write_intent_report(
    out: &mut RunDir,
    report: &TrainReport,
    data: &rowdrive_core::intention::IntentDataset,
) -> Result<(), HarnessError> {
    let mut epochs = Table::new(&["epoch", "loss", "train_accuracy"]);
    for e in &report.epochs {
        epochs.push(vec![e.epoch.to_string(), cell(Some(e.loss)), cell(Some(e.train_accuracy))]);
    }
    out.write_csv("intent_epochs.csv", &epochs)?;
    let mut test = Table::new(&["precision", "recall", "f1", "accuracy"]);
    test.push(classification_cells(&report.test));
    out.write_csv("intent_test.csv", &test)?;
    let names = ["left", "straight", "right"];
    let mut conf = Table::new(&["truth", "pred_left", "pred_straight", "pred_right"]);
    for (i, row) in report.test.confusion.iter().enumerate() {
        conf.push(std::iter::once(names[i].to_string()).chain(row.iter().map(|c| c.to_string())).collect());
    }
    out.write_csv("intent_confusion.csv", &conf)?;
    let mut counts = Table::new(&["split", "left", "straight", "right"]);
    for (split, samples) in [("train", &data.train), ("test", &data.test)] {
        let c = rowdrive_core::intention::IntentDataset::class_counts(samples);
        counts.push(vec![split.into(), c[0].to_string(), c[1].to_string(), c[2].to_string()]);
    }
    out.write_csv("intent_dataset.csv", &counts)?;
    Ok(())
}

fn write_ga(out: &mut RunDir, ga: &EvolveResult) -> Result<(), HarnessError> {
    out.write_text("ga_history.csv", &ga.history_csv())?;
    let best = ga.history.iter().map(|g| (g.generation as f64, g.best)).collect();
    let mean = ga.history.iter().map(|g| (g.generation as f64, g.mean)).collect();
    let std = ga.history.iter().map(|g| g.std).collect();
    out.write_text(
        "ga_history.svg",
        &line_chart_svg("GA fitness", "generation", "fitness", &[
            Series { name: "best".into(), points: best, band: None },
            Series { name: "mean ± std".into(), points: mean, band: Some(std) },
        ]),
    )?;
    Ok(())
}
