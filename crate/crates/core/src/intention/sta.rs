//! Spatial-temporal attention classifier: per-step attention over region
//! vectors feeds an LSTM whose outputs are pooled by temporal attention and
//! classified into three maneuver intentions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::{REGION_COUNT, REGION_DIM, SELF_DIM};
use crate::neural::{
    axpy, dot, softmax, softmax_backward, DenseSpec, LstmSpec, LstmStepCache, ParamLayout, Parameterized, Tensor2,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaConfig {
    pub regions: usize,
    pub region_dim: usize,
    pub self_dim: usize,
    pub hidden: usize,
    /// Width of the additive attention scorer.
    pub attention_dim: usize,
    /// Sequence length in ticks.
    pub steps: usize,
}

impl StaConfig {
    /// Default sizes for a window of `steps` ticks.
    pub fn for_steps(steps: usize) -> Self {
        Self {
            regions: REGION_COUNT,
            region_dim: REGION_DIM,
            self_dim: SELF_DIM,
            hidden: 64,
            attention_dim: 16,
            steps,
        }
    }

    /// Values per time step: all region vectors then the self features.
    pub fn frame_width(&self) -> usize {
        self.regions * self.region_dim + self.self_dim
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct Offsets {
    w_v: usize,
    w_h: usize,
    b_s: usize,
    a_wv: usize,
    a_wh: usize,
    a_b: usize,
    a_u: usize,
    temporal: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StaModel {
    cfg: StaConfig,
    layout: ParamLayout,
    params: Vec<f64>,
    off: Offsets,
    lstm: LstmSpec,
    head: DenseSpec,
}

/// Result of attending over one step's regions.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialOut {
    pub z: Vec<f64>,
    pub weights: Vec<f64>,
    /// `tanh` activations of the additive scorer, `regions × attention_dim`.
    act: Vec<f64>,
}

/// Everything a backward pass needs.
#[derive(Clone, Debug)]
pub struct StaTrace {
    /// `h[0]` is the zero initial state, `h[t + 1]` the output of step `t`.
    pub h: Vec<Vec<f64>>,
    pub spatial: Vec<SpatialOut>,
    lstm: Vec<LstmStepCache>,
    pub temporal_weights: Vec<f64>,
    pub context: Vec<f64>,
    pub probs: [f64; 3],
}

impl StaModel {
    pub fn zeros(cfg: StaConfig) -> Self {
        let (d, h, a) = (cfg.region_dim, cfg.hidden, cfg.attention_dim);
        let mut layout = ParamLayout::new();
        let w_v = layout.push("spatial.w_v", 1, d);
        let w_h = layout.push("spatial.w_h", 1, h);
        let b_s = layout.push("spatial.bias", 1, 1);
        let a_wv = layout.push("spatial.score_v", a, d);
        let a_wh = layout.push("spatial.score_h", a, h);
        let a_b = layout.push("spatial.score_bias", 1, a);
        let a_u = layout.push("spatial.score_out", 1, a);
        let lstm = LstmSpec::register(&mut layout, "lstm", d + cfg.self_dim, h);
        let temporal = layout.push("temporal.v", cfg.steps, h);
        let head = DenseSpec::register(&mut layout, "head", h, 3);
        let params = vec![0.0; layout.len()];
        Self {
            cfg,
            layout,
            params,
            off: Offsets {
                w_v,
                w_h,
                b_s,
                a_wv,
                a_wh,
                a_b,
                a_u,
                temporal,
            },
            lstm,
            head,
        }
    }

    pub fn new<R: Rng + ?Sized>(cfg: StaConfig, rng: &mut R) -> Self {
        let mut m = Self::zeros(cfg);
        let (d, h, a) = (cfg.region_dim, cfg.hidden, cfg.attention_dim);
        let mut fill = |start: usize, n: usize, s: f64, rng: &mut R| {
            for p in &mut m.params[start..start + n] {
                *p = rng.random_range(-s..=s);
            }
        };
        fill(m.off.w_v, d, 0.1, rng);
        fill(m.off.a_wv, a * d, 1.0 / (d as f64).sqrt(), rng);
        fill(m.off.a_wh, a * h, 1.0 / (h as f64).sqrt(), rng);
        fill(m.off.a_u, a, 1.0 / (a as f64).sqrt(), rng);
        fill(m.off.temporal, cfg.steps * h, 0.1 / (h as f64).sqrt(), rng);
        let (lstm, head) = (m.lstm, m.head);
        lstm.init(&mut m.params, rng);
        head.init(&mut m.params, 1.0 / (h as f64).sqrt(), rng);
        m
    }

    pub fn config(&self) -> &StaConfig {
        &self.cfg
    }

    /// Attention over the `regions × region_dim` block `regions` given the
    /// previous hidden state.
    pub fn spatial_attend(&self, regions: &[f64], h_prev: &[f64]) -> SpatialOut {
        let (d, h, a, l) = (self.cfg.region_dim, self.cfg.hidden, self.cfg.attention_dim, self.cfg.regions);
        let p = &self.params;
        let o = &self.off;
        let lin_h = dot(&p[o.w_h..o.w_h + h], h_prev) + p[o.b_s];
        let mut u_h = p[o.a_b..o.a_b + a].to_vec();
        for (k, uk) in u_h.iter_mut().enumerate() {
            *uk += dot(&p[o.a_wh + k * h..o.a_wh + (k + 1) * h], h_prev);
        }
        let u = &p[o.a_u..o.a_u + a];
        let mut act = vec![0.0; l * a];
        let mut logits = vec![0.0; l];
        for i in 0..l {
            let v = &regions[i * d..(i + 1) * d];
            let ai = &mut act[i * a..(i + 1) * a];
            for k in 0..a {
                ai[k] = (u_h[k] + dot(&p[o.a_wv + k * d..o.a_wv + (k + 1) * d], v)).tanh();
            }
            logits[i] = dot(&p[o.w_v..o.w_v + d], v) + lin_h + dot(u, ai);
        }
        let weights = softmax(&logits);
        let mut z = vec![0.0; d];
        for (i, g) in weights.iter().enumerate() {
            axpy(*g, &regions[i * d..(i + 1) * d], &mut z);
        }
        SpatialOut { z, weights, act }
    }

    /// Convenience form of [`spatial_attend`](Self::spatial_attend) on a grid tensor.
    pub fn spatial_attend_grid(&self, grid: &Tensor2, h_prev: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let out = self.spatial_attend(grid.data(), h_prev);
        (out.z, out.weights)
    }

    fn spatial_backward(&self, regions: &[f64], h_prev: &[f64], out: &SpatialOut, dz: &[f64], grads: &mut [f64]) -> Vec<f64> {
        let (d, h, a, l) = (self.cfg.region_dim, self.cfg.hidden, self.cfg.attention_dim, self.cfg.regions);
        let p = &self.params;
        let o = &self.off;
        let dg: Vec<f64> = (0..l).map(|i| dot(dz, &regions[i * d..(i + 1) * d])).collect();
        let de = softmax_backward(&out.weights, &dg);
        let sum_de: f64 = de.iter().sum();
        let u = &p[o.a_u..o.a_u + a];
        let mut sum_dpre = vec![0.0; a];
        for i in 0..l {
            let v = &regions[i * d..(i + 1) * d];
            axpy(de[i], v, &mut grads[o.w_v..o.w_v + d]);
            let ai = &out.act[i * a..(i + 1) * a];
            axpy(de[i], ai, &mut grads[o.a_u..o.a_u + a]);
            for k in 0..a {
                let dpre = de[i] * u[k] * (1.0 - ai[k] * ai[k]);
                if dpre != 0.0 {
                    axpy(dpre, v, &mut grads[o.a_wv + k * d..o.a_wv + (k + 1) * d]);
                }
                sum_dpre[k] += dpre;
            }
        }
        axpy(sum_de, h_prev, &mut grads[o.w_h..o.w_h + h]);
        grads[o.b_s] += sum_de;
        let mut dh = vec![0.0; h];
        axpy(sum_de, &p[o.w_h..o.w_h + h], &mut dh);
        for k in 0..a {
            grads[o.a_b + k] += sum_dpre[k];
            axpy(sum_dpre[k], h_prev, &mut grads[o.a_wh + k * h..o.a_wh + (k + 1) * h]);
            axpy(sum_dpre[k], &p[o.a_wh + k * h..o.a_wh + (k + 1) * h], &mut dh);
        }
        dh
    }

    /// Temporal attention over `hs` (oldest first, at most `steps` long,
    /// aligned to the end of the learned vectors). Returns `(C_T, weights)`.
    pub fn temporal_attend(&self, hs: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        let h = self.cfg.hidden;
        assert!(hs.len() <= self.cfg.steps, "sequence longer than the model window");
        let base = self.off.temporal + (self.cfg.steps - hs.len()) * h;
        let scores: Vec<f64> = hs
            .iter()
            .enumerate()
            .map(|(t, ht)| dot(&self.params[base + t * h..base + (t + 1) * h], ht))
            .collect();
        let w = softmax(&scores);
        let mut c = vec![0.0; h];
        for (wt, ht) in w.iter().zip(hs) {
            axpy(*wt, ht, &mut c);
        }
        (c, w)
    }

    /// Full forward pass over a `steps × frame_width` sequence.
    pub fn forward(&self, seq: &[f64]) -> StaTrace {
        let cfg = &self.cfg;
        let fw = cfg.frame_width();
        assert_eq!(seq.len(), cfg.steps * fw, "sequence shape");
        let nr = cfg.regions * cfg.region_dim;
        let mut h = vec![vec![0.0; cfg.hidden]];
        let mut c = vec![0.0; cfg.hidden];
        let mut spatial = Vec::with_capacity(cfg.steps);
        let mut caches = Vec::with_capacity(cfg.steps);
        let mut x = vec![0.0; cfg.region_dim + cfg.self_dim];
        for t in 0..cfg.steps {
            let frame = &seq[t * fw..(t + 1) * fw];
            let sp = self.spatial_attend(&frame[..nr], &h[t]);
            x[..cfg.region_dim].copy_from_slice(&sp.z);
            x[cfg.region_dim..].copy_from_slice(&frame[nr..]);
            let (ht, cache) = self.lstm.step(&self.params, &x, &h[t], &c);
            c.clone_from(&cache.c);
            h.push(ht);
            spatial.push(sp);
            caches.push(cache);
        }
        let (context, temporal_weights) = self.temporal_attend(&h[1..]);
        let mut logits = [0.0; 3];
        self.head.forward(&self.params, &context, &mut logits);
        let p = softmax(&logits);
        StaTrace {
            h,
            spatial,
            lstm: caches,
            temporal_weights,
            context,
            probs: [p[0], p[1], p[2]],
        }
    }

    pub fn predict(&self, seq: &[f64]) -> [f64; 3] {
        self.forward(seq).probs
    }

    /// Cross-entropy loss for `label`; gradients are added into `grads`.
    pub fn loss_and_grad(&self, seq: &[f64], label: usize, grads: &mut [f64]) -> f64 {
        let tr = self.forward(seq);
        self.backward(seq, &tr, label, grads);
        -tr.probs[label].max(1e-300).ln()
    }

    fn backward(&self, seq: &[f64], tr: &StaTrace, label: usize, grads: &mut [f64]) {
        let cfg = &self.cfg;
        let (hd, steps, fw) = (cfg.hidden, cfg.steps, cfg.frame_width());
        let nr = cfg.regions * cfg.region_dim;
        let mut dlogits = tr.probs;
        dlogits[label] -= 1.0;
        let mut dctx = vec![0.0; hd];
        self.head.backward(&self.params, &tr.context, &dlogits, grads, Some(&mut dctx));

        let mut dh: Vec<Vec<f64>> = vec![vec![0.0; hd]; steps];
        let dw: Vec<f64> = (0..steps).map(|t| dot(&dctx, &tr.h[t + 1])).collect();
        let ds = softmax_backward(&tr.temporal_weights, &dw);
        let base = self.off.temporal;
        for t in 0..steps {
            axpy(tr.temporal_weights[t], &dctx, &mut dh[t]);
            axpy(ds[t], &tr.h[t + 1], &mut grads[base + t * hd..base + (t + 1) * hd]);
            axpy(ds[t], &self.params[base + t * hd..base + (t + 1) * hd], &mut dh[t]);
        }

        let mut dh_carry = vec![0.0; hd];
        let mut dc_carry = vec![0.0; hd];
        for t in (0..steps).rev() {
            for (a, b) in dh[t].iter_mut().zip(&dh_carry) {
                *a += b;
            }
            let (dx, dh_prev, dc_prev) = self.lstm.backward(&self.params, &tr.lstm[t], &dh[t], &dc_carry, grads);
            let frame = &seq[t * fw..(t + 1) * fw];
            let dsp = self.spatial_backward(&frame[..nr], &tr.h[t], &tr.spatial[t], &dx[..cfg.region_dim], grads);
            dh_carry = dh_prev;
            for (a, b) in dh_carry.iter_mut().zip(&dsp) {
                *a += b;
            }
            dc_carry = dc_prev;
        }
    }
}

impl Parameterized for StaModel {
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
