use serde::{Deserialize, Serialize};

use super::NeuralError;

/// A named matrix inside a flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl ParamBlock {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    blocks: Vec<ParamBlock>,
    total: usize,
}

impl ParamLayout {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append a block and return its offset.
    pub fn push(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> usize {
        let offset = self.total;
        self.blocks.push(ParamBlock {
            name: name.into(),
            rows,
            cols,
            offset,
        });
        self.total += rows * cols;
        offset
    }

    pub fn blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn block(&self, name: &str) -> Option<&ParamBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    /// Block containing flat index `i`.
    pub fn block_of(&self, i: usize) -> Option<&ParamBlock> {
        self.blocks.iter().find(|b| b.range().contains(&i))
    }
}

/// Anything whose trainable state is one flat vector described by a layout.
pub trait Parameterized {
    fn layout(&self) -> &ParamLayout;
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];

    fn param_count(&self) -> usize {
        self.params().len()
    }

    fn set_params(&mut self, values: &[f64]) -> Result<(), NeuralError> {
        if values.len() != self.param_count() {
            return Err(NeuralError::ShapeMismatch {
                expected: format!("{} parameters", self.param_count()),
                found: format!("{} parameters", values.len()),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            let block = self.layout().block_of(i).map(|b| b.name.clone()).unwrap_or_default();
            return Err(NeuralError::NonFinite(format!("parameter {i} in block {block}")));
        }
        self.params_mut().copy_from_slice(values);
        Ok(())
    }
}

/// `target ← τ·online + (1 − τ)·target`.
pub fn soft_update(target: &mut [f64], online: &[f64], tau: f64) {
    assert_eq!(target.len(), online.len(), "soft update between different layouts");
    if tau == 1.0 {
        target.copy_from_slice(online);
        return;
    }
    for (t, o) in target.iter_mut().zip(online) {
        *t = tau * o + (1.0 - tau) * *t;
    }
}
