use rand::Rng;
use serde::{Deserialize, Serialize};

use super::activation::sigmoid;
use super::params::{ParamLayout, Parameterized};
use super::tensor::{axpy, dot};

/// LSTM gate weights inside a flat parameter vector. Gate order is
/// input, forget, cell candidate, output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LstmSpec {
    pub input: usize,
    pub hidden: usize,
    pub wx: usize,
    pub wh: usize,
    pub b: usize,
}

/// Values kept from a forward step for backpropagation.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmStepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Activated gates `[i; f; g; o]`.
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

impl LstmSpec {
    pub fn register(layout: &mut ParamLayout, name: &str, input: usize, hidden: usize) -> Self {
        let wx = layout.push(format!("{name}.w_x"), 4 * hidden, input);
        let wh = layout.push(format!("{name}.w_h"), 4 * hidden, hidden);
        let b = layout.push(format!("{name}.bias"), 1, 4 * hidden);
        Self {
            input,
            hidden,
            wx,
            wh,
            b,
        }
    }

    /// Uniform `±1/√hidden` weights, forget bias 1.
    pub fn init<R: Rng + ?Sized>(&self, params: &mut [f64], rng: &mut R) {
        let s = 1.0 / (self.hidden as f64).sqrt();
        let h4 = 4 * self.hidden;
        for w in &mut params[self.wx..self.wx + h4 * self.input] {
            *w = rng.random_range(-s..=s);
        }
        for w in &mut params[self.wh..self.wh + h4 * self.hidden] {
            *w = rng.random_range(-s..=s);
        }
        let b = &mut params[self.b..self.b + h4];
        b.fill(0.0);
        b[self.hidden..2 * self.hidden].fill(1.0);
    }

    pub fn step(&self, params: &[f64], x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> (Vec<f64>, LstmStepCache) {
        let (n, h) = (self.input, self.hidden);
        let mut gates = vec![0.0; 4 * h];
        for (k, z) in gates.iter_mut().enumerate() {
            *z = params[self.b + k]
                + dot(&params[self.wx + k * n..self.wx + (k + 1) * n], x)
                + dot(&params[self.wh + k * h..self.wh + (k + 1) * h], h_prev);
        }
        for (k, z) in gates.iter_mut().enumerate() {
            *z = if (2 * h..3 * h).contains(&k) { z.tanh() } else { sigmoid(*z) };
        }
        let mut c = vec![0.0; h];
        let mut tanh_c = vec![0.0; h];
        let mut h_out = vec![0.0; h];
        for j in 0..h {
            c[j] = gates[h + j] * c_prev[j] + gates[j] * gates[2 * h + j];
            tanh_c[j] = c[j].tanh();
            h_out[j] = gates[3 * h + j] * tanh_c[j];
        }
        let cache = LstmStepCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            gates,
            c,
            tanh_c,
        };
        (h_out, cache)
    }

    /// Backward through one step. `dh` and `dc` are gradients w.r.t. this
    /// step's outputs; returns `(dx, dh_prev, dc_prev)`.
    pub fn backward(
        &self,
        params: &[f64],
        cache: &LstmStepCache,
        dh: &[f64],
        dc: &[f64],
        grads: &mut [f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (n, h) = (self.input, self.hidden);
        let g = &cache.gates;
        let mut dz = vec![0.0; 4 * h];
        let mut dc_prev = vec![0.0; h];
        for j in 0..h {
            let (i, f, gg, o) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
            let do_ = dh[j] * cache.tanh_c[j];
            let dct = dc[j] + dh[j] * o * (1.0 - cache.tanh_c[j] * cache.tanh_c[j]);
            dz[j] = dct * gg * i * (1.0 - i);
            dz[h + j] = dct * cache.c_prev[j] * f * (1.0 - f);
            dz[2 * h + j] = dct * i * (1.0 - gg * gg);
            dz[3 * h + j] = do_ * o * (1.0 - o);
            dc_prev[j] = dct * f;
        }
        let mut dx = vec![0.0; n];
        let mut dh_prev = vec![0.0; h];
        for (k, d) in dz.iter().enumerate() {
            grads[self.b + k] += d;
            if *d == 0.0 {
                continue;
            }
            axpy(*d, &cache.x, &mut grads[self.wx + k * n..self.wx + (k + 1) * n]);
            axpy(*d, &cache.h_prev, &mut grads[self.wh + k * h..self.wh + (k + 1) * h]);
            axpy(*d, &params[self.wx + k * n..self.wx + (k + 1) * n], &mut dx);
            axpy(*d, &params[self.wh + k * h..self.wh + (k + 1) * h], &mut dh_prev);
        }
        (dx, dh_prev, dc_prev)
    }
}

/// A standalone LSTM cell owning its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmCell {
    pub spec: LstmSpec,
    layout: ParamLayout,
    params: Vec<f64>,
}

impl LstmCell {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let mut layout = ParamLayout::new();
        let spec = LstmSpec::register(&mut layout, "lstm", input, hidden);
        let params = vec![0.0; layout.len()];
        Self { spec, layout, params }
    }

    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut cell = Self::zeros(input, hidden);
        cell.spec.init(&mut cell.params, rng);
        cell
    }

    /// One step: `(h_t, c_t)`.
    pub fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (h, cache) = self.spec.step(&self.params, x, h_prev, c_prev);
        (h, cache.c)
    }
}

impl Parameterized for LstmCell {
    fn layout(&self) -> &ParamLayout {
        &self.layout
    }
    fn params(&self) -> &[f64] {
        &self.params
    }
    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }
}
