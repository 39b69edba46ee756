//! Intention inference for surrounding vehicles.

mod dataset;
mod features;
mod metrics;
mod sta;
mod train;

use thiserror::Error;

pub use dataset::{
    balance, build_intent_dataset, harvest_episode, push_frame, split, DatasetConfig, IntentDataset, IntentSample,
    FRAME_WIDTH,
};
pub use features::{
    region_grid, self_features, CELL_LENGTH, GRID_CELLS, GRID_LANES, REGION_COUNT, REGION_DIM, SELF_DIM,
};
pub use metrics::ClassificationMetrics;
pub use sta::{SpatialOut, StaConfig, StaModel, StaTrace};
pub use train::{evaluate, infer_intention, train_sta, window_sweep, EpochStats, TrainConfig, TrainReport, WindowResult};

#[derive(Debug, Error)]
pub enum IntentionError {
    #[error("need at least 3 ticks of history, got {available}")]
    WindowTooShort { available: usize },
    #[error("intention config: {0}")]
    Config(String),
    #[error("dataset format: {0}")]
    Format(String),
    #[error(transparent)]
    Neural(#[from] crate::neural::NeuralError),
    #[error(transparent)]
    World(#[from] crate::world::WorldError),
    #[error("dataset i/o: {0}")]
    Io(#[from] std::io::Error),
}
