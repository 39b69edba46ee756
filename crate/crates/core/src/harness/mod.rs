//! Experiment orchestration: configs, pipelines, metrics and run outputs.

mod config;
mod metrics;
mod output;
mod pipeline;

use thiserror::Error;

pub use config::{AblationMode, ExperimentConfig, HarnessConfig, IntentConfig};
pub use metrics::{compute_metrics, tick_series, time_headway, MetricsReport, TickMetrics, THW_MIN_SPEED};
pub use output::{cell, line_chart_svg, FileEntry, Manifest, RunDir, Series, Table, MANIFEST_FILE, MANIFEST_FORMAT};
pub use pipeline::{
    build_intent_data, derive_seed, episode_options, evaluate_actor, evolve_actor, mean_fitness, median, run_ablation, run_density_sweep, score_actor, reward_bands,
    run_seed, sweep_windows, train_intent_model, train_policy, AblationOutcome, AblationRow, DensityRow, TrainedPolicy,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config {path}: {message}")]
    Config { path: String, message: String },
    #[error("no episodes to summarize")]
    EmptyInput,
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("format: {0}")]
    Format(String),
    #[error(transparent)]
    World(#[from] crate::world::WorldError),
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
    #[error(transparent)]
    Intention(#[from] crate::intention::IntentionError),
    #[error(transparent)]
    Agent(#[from] crate::agent::AgentError),
    #[error(transparent)]
    Evolve(#[from] crate::evolve::EvolveError),
    #[error(transparent)]
    Neural(#[from] crate::neural::NeuralError),
}

impl HarnessError {
    /// Process exit status: 1 for configuration problems, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } => 1,
            _ => 2,
        }
    }
}
