use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::ParamLayout;
use super::tensor::{axpy, dot, Tensor2};
use super::NeuralError;

/// Affine layer `y = W x + b` whose weights live in a flat parameter vector;
/// `W` is `output × input`, row-major.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseSpec {
    pub input: usize,
    pub output: usize,
    pub w: usize,
    pub b: usize,
}

impl DenseSpec {
    pub fn register(layout: &mut ParamLayout, name: &str, input: usize, output: usize) -> Self {
        let w = layout.push(format!("{name}.weight"), output, input);
        let b = layout.push(format!("{name}.bias"), 1, output);
        Self { input, output, w, b }
    }

    pub fn weights<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[self.w..self.w + self.input * self.output]
    }

    pub fn bias<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[self.b..self.b + self.output]
    }

    /// Uniform `±scale` weights and zero bias.
    pub fn init<R: Rng + ?Sized>(&self, params: &mut [f64], scale: f64, rng: &mut R) {
        for w in &mut params[self.w..self.w + self.input * self.output] {
            *w = rng.random_range(-scale..=scale);
        }
        params[self.b..self.b + self.output].fill(0.0);
    }

    pub fn forward(&self, params: &[f64], x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.input);
        let w = self.weights(params);
        for (o, (yo, bo)) in y.iter_mut().zip(self.bias(params)).enumerate() {
            *yo = bo + dot(&w[o * self.input..(o + 1) * self.input], x);
        }
    }

    /// Accumulate parameter gradients into `grads` and, when requested,
    /// write the input gradient into `dx`.
    pub fn backward(&self, params: &[f64], x: &[f64], dy: &[f64], grads: &mut [f64], dx: Option<&mut [f64]>) {
        let n = self.input;
        for (o, g) in dy.iter().enumerate() {
            if *g != 0.0 {
                axpy(*g, x, &mut grads[self.w + o * n..self.w + (o + 1) * n]);
            }
            grads[self.b + o] += g;
        }
        if let Some(dx) = dx {
            dx.fill(0.0);
            let w = self.weights(params);
            for (o, g) in dy.iter().enumerate() {
                if *g != 0.0 {
                    axpy(*g, &w[o * n..(o + 1) * n], dx);
                }
            }
        }
    }
}

/// Gradients of a dense layer.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseGrads {
    pub dw: Tensor2,
    pub db: Vec<f64>,
    pub dx: Vec<f64>,
}

fn check(w: &Tensor2, b: Option<&[f64]>, x: &[f64]) -> Result<(), NeuralError> {
    if x.len() != w.cols() || b.is_some_and(|b| b.len() != w.rows()) {
        return Err(NeuralError::ShapeMismatch {
            expected: format!("W {}x{}, b {}, x {}", w.rows(), w.cols(), w.rows(), w.cols()),
            found: format!("b {}, x {}", b.map_or(w.rows(), |b| b.len()), x.len()),
        });
    }
    Ok(())
}

pub fn dense_forward(w: &Tensor2, b: &[f64], x: &[f64]) -> Result<Vec<f64>, NeuralError> {
    check(w, Some(b), x)?;
    Ok((0..w.rows()).map(|o| b[o] + dot(w.row(o), x)).collect())
}

pub fn dense_backward(w: &Tensor2, x: &[f64], dy: &[f64]) -> Result<DenseGrads, NeuralError> {
    check(w, None, x)?;
    if dy.len() != w.rows() {
        return Err(NeuralError::ShapeMismatch {
            expected: format!("dy of length {}", w.rows()),
            found: format!("{}", dy.len()),
        });
    }
    let mut dw = Tensor2::zeros(w.rows(), w.cols());
    let mut dx = vec![0.0; w.cols()];
    for (o, g) in dy.iter().enumerate() {
        axpy(*g, x, dw.row_mut(o));
        axpy(*g, w.row(o), &mut dx);
    }
    Ok(DenseGrads { dw, db: dy.to_vec(), dx })
}
