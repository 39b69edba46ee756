//! Experiment configuration files and built-in profiles.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::agent::{AgentTrainConfig, Td3Config};
use crate::evolve::GaConfig;
use crate::intention::{DatasetConfig, TrainConfig};
use crate::neural::LinearAnneal;
use crate::reward::{FitnessWeights, RewardWeights};
use crate::world::ScenarioConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    Full,
    NoSituationAwareness,
    NoEvolution,
}

impl AblationMode {
    pub const ALL: [AblationMode; 3] = [
        AblationMode::Full,
        AblationMode::NoSituationAwareness,
        AblationMode::NoEvolution,
    ];

    pub fn uses_intentions(self) -> bool {
        self != AblationMode::NoSituationAwareness
    }

    pub fn uses_evolution(self) -> bool {
        self != AblationMode::NoEvolution
    }

    pub fn name(self) -> &'static str {
        match self {
            AblationMode::Full => "full",
            AblationMode::NoSituationAwareness => "no_situation_awareness",
            AblationMode::NoEvolution => "no_evolution",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntentConfig {
    pub dataset: DatasetConfig,
    pub train: TrainConfig,
    /// Look-back window of the deployed model, seconds.
    pub window_s: usize,
    pub sweep_windows_s: Vec<usize>,
    pub ticks_per_s: usize,
}

impl Default for IntentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetConfig::default(),
            train: TrainConfig::default(),
            window_s: 4,
            sweep_windows_s: (1..=8).collect(),
            ticks_per_s: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Independent training seeds per mode.
    pub seeds: usize,
    /// Greedy evaluation episodes per trained policy and density.
    pub eval_episodes: usize,
    /// Held-out episodes scoring TD3 checkpoints.
    pub validation_episodes: usize,
    pub densities: Vec<f64>,
    pub modes: Vec<AblationMode>,
    /// Episodes written by `simulate`.
    pub simulate_episodes: usize,
    /// Neighbors kept in logs, meters along the road from the ego.
    pub log_radius: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seeds: 10,
            eval_episodes: 10,
            validation_episodes: 5,
            densities: vec![60.0, 100.0, 150.0],
            modes: AblationMode::ALL.to_vec(),
            simulate_episodes: 1,
            log_radius: 120.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub scenario: ScenarioConfig,
    pub reward: RewardWeights,
    pub fitness_weights: FitnessWeights,
    pub intent: IntentConfig,
    pub td3: Td3Config,
    pub agent: AgentTrainConfig,
    pub ga: GaConfig,
    pub experiment: ExperimentConfig,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self::quick()
    }
}

impl HarnessConfig {
    /// Desk-scale budgets: small GA, short training.
    pub fn quick() -> Self {
        let lr = LinearAnneal {
            start: 1e-3,
            end: 1e-6,
            steps: 4000,
        };
        Self {
            scenario: ScenarioConfig {
                max_ticks: 400,
                ..Default::default()
            },
            reward: RewardWeights::default(),
            fitness_weights: FitnessWeights::default(),
            intent: IntentConfig::default(),
            td3: Td3Config {
                batch_size: 64,
                buffer_capacity: 100_000,
                actor_lr: lr,
                critic_lr: lr,
                actor_warmup: 1000,
                ..Default::default()
            },
            agent: AgentTrainConfig {
                episodes: 200,
                max_updates: 4000,
                warmup_steps: 1000,
                ..Default::default()
            },
            ga: GaConfig {
                population: 16,
                max_generations: 20,
                episodes_per_eval: 3,
                ..Default::default()
            },
            experiment: ExperimentConfig::default(),
        }
    }

    /// Full-scale budgets: population 50, 100 generations, long training.
    pub fn reference() -> Self {
        Self {
            scenario: ScenarioConfig {
                max_ticks: 1000,
                ..Default::default()
            },
            td3: Td3Config::default(),
            agent: AgentTrainConfig {
                episodes: 10_000,
                max_updates: 20_000,
                ..Default::default()
            },
            ga: GaConfig::default(),
            experiment: ExperimentConfig {
                eval_episodes: 100,
                ..Default::default()
            },
            ..Self::quick()
        }
    }

    pub fn profile(name: &str) -> Option<Self> {
        match name {
            "quick" => Some(Self::quick()),
            "reference" => Some(Self::reference()),
            _ => None,
        }
    }

    /// Read a TOML file. Missing keys take the quick-profile values.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let err = |message: String| HarnessError::Config {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| err(e.to_string()))?;
        cfg.validate().map_err(|m| err(m))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), String> {
        self.scenario.validate().map_err(|e| format!("scenario: {e}"))?;
        self.intent.dataset.scenario.validate().map_err(|e| format!("intent.dataset.scenario: {e}"))?;
        self.reward.validate().map_err(|e| format!("reward: {e}"))?;
        self.td3.validate().map_err(|e| format!("td3: {e}"))?;
        self.ga.validate().map_err(|e| format!("ga: {e}"))?;
        let i = &self.intent;
        if i.window_s == 0 || i.ticks_per_s == 0 || i.sweep_windows_s.contains(&0) {
            return Err("intent windows and ticks_per_s must be positive".into());
        }
        let longest = i.sweep_windows_s.iter().copied().max().unwrap_or(0).max(i.window_s) * i.ticks_per_s;
        if longest > i.dataset.window_ticks {
            return Err(format!(
                "intent windows need {longest} ticks but the dataset captures {}",
                i.dataset.window_ticks
            ));
        }
        let e = &self.experiment;
        if e.seeds == 0 || e.eval_episodes == 0 || e.validation_episodes == 0 {
            return Err("experiment.seeds, eval_episodes and validation_episodes must be positive".into());
        }
        if e.densities.iter().any(|d| !(*d > 0.0)) {
            return Err("experiment.densities must be positive".into());
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form of the config and the seed.
    pub fn hash(&self, seed: u64) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self).expect("config serializes"));
        h.update(seed.to_le_bytes());
        hex::encode(h.finalize())
    }
}
