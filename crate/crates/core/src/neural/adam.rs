use serde::{Deserialize, Serialize};

use super::params::ParamLayout;
use super::NeuralError;

/// Learning rate moving linearly from `start` to `end` over `steps` updates,
/// then held at `end`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearAnneal {
    pub start: f64,
    pub end: f64,
    pub steps: usize,
}

impl LinearAnneal {
    pub fn constant(lr: f64) -> Self {
        Self {
            start: lr,
            end: lr,
            steps: 1,
        }
    }

    pub fn at(&self, step: usize) -> f64 {
        if self.steps == 0 {
            return self.end;
        }
        let frac = (step as f64 / self.steps as f64).min(1.0);
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub schedule: LinearAnneal,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Rescale gradients whose global norm exceeds this.
    pub max_grad_norm: Option<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
    t: usize,
}

impl Adam {
    pub fn new(n: usize, schedule: LinearAnneal) -> Self {
        Self {
            schedule,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            max_grad_norm: None,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn with_clip(mut self, max_norm: f64) -> Self {
        self.max_grad_norm = Some(max_norm);
        self
    }

    pub fn steps_taken(&self) -> usize {
        self.t
    }

    pub fn current_lr(&self) -> f64 {
        self.schedule.at(self.t)
    }

    /// One adaptive-moment update. Non-finite gradients abort before any
    /// state changes and name the offending block.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], layout: &ParamLayout) -> Result<(), NeuralError> {
        assert_eq!(params.len(), self.m.len(), "optimizer sized for a different model");
        assert_eq!(grads.len(), params.len(), "gradient length mismatch");
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            let block = layout
                .block_of(i)
                .map(|b| b.name.clone())
                .unwrap_or_else(|| format!("index {i}"));
            return Err(NeuralError::NonFiniteGradient { block, index: i });
        }
        let scale = match self.max_grad_norm {
            Some(max) => {
                let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > max { max / norm } else { 1.0 }
            }
            None => 1.0,
        };
        let lr = self.schedule.at(self.t);
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i] * scale;
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            params[i] -= lr * mh / (vh.sqrt() + self.eps);
        }
        Ok(())
    }
}
