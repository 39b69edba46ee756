//! Mini-batch training, evaluation and the look-back window sweep.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{IntentDataset, IntentSample, FRAME_WIDTH};
use super::metrics::ClassificationMetrics;
use super::sta::{StaConfig, StaModel};
use super::IntentionError;
use crate::neural::{Adam, LinearAnneal, Parameterized};
use crate::par;
use crate::world::IntentLabel;

/// Batches are split into this many gradient chunks regardless of thread
/// count, so results do not depend on the worker pool size.
const GRAD_CHUNKS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub max_grad_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 64,
            lr_start: 3e-3,
            lr_end: 1e-4,
            max_grad_norm: 5.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub steps: usize,
    pub epochs: Vec<EpochStats>,
    pub test: ClassificationMetrics,
}

fn argmax(p: &[f64; 3]) -> usize {
    let mut best = 0;
    for k in 1..3 {
        if p[k] > p[best] {
            best = k;
        }
    }
    best
}

pub fn evaluate(model: &StaModel, samples: &[IntentSample]) -> ClassificationMetrics {
    let steps = model.config().steps;
    let preds = par::map_slice(samples, |_, s| argmax(&model.predict(s.tail(steps))));
    let truth: Vec<usize> = samples.iter().map(|s| s.label.index()).collect();
    ClassificationMetrics::from_predictions(&truth, &preds)
}

/// Train a fresh model on the last `steps` frames of every sample.
pub fn train_sta(data: &IntentDataset, steps: usize, cfg: &TrainConfig) -> Result<(StaModel, TrainReport), IntentionError> {
    if steps < 3 {
        return Err(IntentionError::WindowTooShort { available: steps });
    }
    if steps > data.window_ticks {
        return Err(IntentionError::Config(format!(
            "window of {steps} ticks exceeds the {} captured",
            data.window_ticks
        )));
    }
    if data.train.is_empty() || cfg.batch_size == 0 {
        return Err(IntentionError::Config("empty training set or zero batch size".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = StaModel::new(StaConfig::for_steps(steps), &mut rng);
    let batches_per_epoch = data.train.len().div_ceil(cfg.batch_size);
    let total = batches_per_epoch * cfg.epochs;
    let mut opt = Adam::new(
        model.param_count(),
        LinearAnneal {
            start: cfg.lr_start,
            end: cfg.lr_end,
            steps: total,
        },
    )
    .with_clip(cfg.max_grad_norm);
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            let chunk_len = batch.len().div_ceil(GRAD_CHUNKS);
            let chunks: Vec<&[usize]> = batch.chunks(chunk_len).collect();
            let parts = par::map_slice(&chunks, |_, chunk| {
                let mut g = vec![0.0; model.param_count()];
                let (mut loss, mut hits) = (0.0, 0usize);
                for &i in chunk.iter() {
                    let s = &data.train[i];
                    let seq = s.tail(steps);
                    let label = s.label.index();
                    let tr = model.forward(seq);
                    if argmax(&tr.probs) == label {
                        hits += 1;
                    }
                    loss += model.loss_and_grad(seq, label, &mut g);
                }
                (g, loss, hits)
            });
            let mut grads = vec![0.0; model.param_count()];
            for (g, loss, hits) in parts {
                for (a, b) in grads.iter_mut().zip(&g) {
                    *a += b;
                }
                loss_sum += loss;
                correct += hits;
            }
            let inv = 1.0 / batch.len() as f64;
            grads.iter_mut().for_each(|g| *g *= inv);
            let layout = model.layout().clone();
            opt.step(model.params_mut(), &grads, &layout)?;
        }
        epochs.push(EpochStats {
            epoch,
            loss: loss_sum / data.train.len() as f64,
            train_accuracy: correct as f64 / data.train.len() as f64,
        });
    }
    let test = evaluate(&model, &data.test);
    Ok((model, TrainReport { steps, epochs, test }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowResult {
    pub window_s: usize,
    pub metrics: ClassificationMetrics,
}

/// Train one model per look-back window (seconds, at `ticks_per_s`) with
/// identical seeds and budgets.
pub fn window_sweep(
    data: &IntentDataset,
    windows_s: &[usize],
    ticks_per_s: usize,
    cfg: &TrainConfig,
) -> Result<Vec<WindowResult>, IntentionError> {
    let results = par::try_map_range(windows_s.len(), |k| {
        let (_, report) = train_sta(data, windows_s[k] * ticks_per_s, cfg)?;
        Ok::<_, IntentionError>(WindowResult {
            window_s: windows_s[k],
            metrics: report.test,
        })
    })?;
    Ok(results)
}

/// Classify a track of frames (oldest first, each `FRAME_WIDTH` values).
/// Shorter tracks are zero-padded at the front; longer ones are truncated
/// to the most recent frames.
pub fn infer_intention(model: &StaModel, frames: &[f64]) -> Result<(IntentLabel, [f64; 3]), IntentionError> {
    if frames.len() % FRAME_WIDTH != 0 {
        return Err(IntentionError::Config(format!(
            "track of {} values is not a whole number of {FRAME_WIDTH}-value frames",
            frames.len()
        )));
    }
    let available = frames.len() / FRAME_WIDTH;
    if available < 3 {
        return Err(IntentionError::WindowTooShort { available });
    }
    let steps = model.config().steps;
    let probs = if available >= steps {
        model.predict(&frames[(available - steps) * FRAME_WIDTH..])
    } else {
        let mut padded = vec![0.0; (steps - available) * FRAME_WIDTH];
        padded.extend_from_slice(frames);
        model.predict(&padded)
    };
    let label = IntentLabel::from_index(argmax(&probs)).expect("three classes");
    Ok((label, probs))
}
