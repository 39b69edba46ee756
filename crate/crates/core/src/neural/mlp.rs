use rand::Rng;

use super::activation::Activation;
use super::dense::DenseSpec;
use super::params::{ParamLayout, Parameterized};

/// Output-layer weights start in `±OUTPUT_INIT` so fresh policies act near zero.
pub const OUTPUT_INIT: f64 = 3e-3;

/// Fully connected stack with one activation for hidden layers and one for
/// the output.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layout: ParamLayout,
    params: Vec<f64>,
    layers: Vec<DenseSpec>,
    hidden_act: Activation,
    out_act: Activation,
}

/// Per-layer activations from a forward pass; `acts[0]` is the input.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpCache {
    pub acts: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("cache holds at least the input")
    }
}

impl Mlp {
    /// All-zero network with layer widths `sizes` (input first).
    pub fn zeros(name: &str, sizes: &[usize], hidden_act: Activation, out_act: Activation) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let mut layout = ParamLayout::new();
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(k, w)| DenseSpec::register(&mut layout, &format!("{name}.l{k}"), w[0], w[1]))
            .collect();
        let params = vec![0.0; layout.len()];
        Self {
            layout,
            params,
            layers,
            hidden_act,
            out_act,
        }
    }

    /// Hidden layers uniform in `±1/√fan_in`, output layer in `±OUTPUT_INIT`.
    pub fn new<R: Rng + ?Sized>(
        name: &str,
        sizes: &[usize],
        hidden_act: Activation,
        out_act: Activation,
        rng: &mut R,
    ) -> Self {
        let mut m = Self::zeros(name, sizes, hidden_act, out_act);
        let last = m.layers.len() - 1;
        for (k, l) in m.layers.clone().iter().enumerate() {
            let scale = if k == last { OUTPUT_INIT } else { 1.0 / (l.input as f64).sqrt() };
            l.init(&mut m.params, scale, rng);
        }
        m
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.output).unwrap_or(0)
    }

    pub fn layers(&self) -> &[DenseSpec] {
        &self.layers
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            let mut y = vec![0.0; l.output];
            l.forward(&self.params, &cur, &mut y);
            if k == last { self.out_act } else { self.hidden_act }.apply(&mut y);
            cur = y;
        }
        cur
    }

    pub fn forward_cached(&self, x: &[f64]) -> MlpCache {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            let mut y = vec![0.0; l.output];
            l.forward(&self.params, &acts[k], &mut y);
            if k == last { self.out_act } else { self.hidden_act }.apply(&mut y);
            acts.push(y);
        }
        MlpCache { acts }
    }

    /// Accumulate parameter gradients for upstream `dout` (w.r.t. the
    /// activated output) into `grads`; returns the input gradient.
    pub fn backward(&self, cache: &MlpCache, dout: &[f64], grads: &mut [f64]) -> Vec<f64> {
        let last = self.layers.len() - 1;
        let mut g = dout.to_vec();
        for k in (0..self.layers.len()).rev() {
            let l = &self.layers[k];
            if k == last { self.out_act } else { self.hidden_act }.backward(&cache.acts[k + 1], &mut g);
            let mut dx = vec![0.0; l.input];
            l.backward(&self.params, &cache.acts[k], &g, grads, Some(&mut dx));
            g = dx;
        }
        g
    }
}

impl Parameterized for Mlp {
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
