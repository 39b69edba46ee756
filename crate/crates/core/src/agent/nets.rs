//! Actor and critic networks.

use rand::Rng;

use super::action::{ControlCommand, Maneuver, ACCEL_BOUND, HEADING_BOUND};
use super::ACTION_DIM;
use crate::neural::{softmax, softmax_backward, Activation, Mlp, MlpCache, ParamLayout, Parameterized};

/// Decoded actor output. `action` is what critics see: maneuver
/// probabilities followed by the heading and acceleration in `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActorOutput {
    pub raw: [f64; ACTION_DIM],
    pub action: [f64; ACTION_DIM],
}

impl ActorOutput {
    pub fn from_raw(raw: &[f64]) -> Self {
        let mut r = [0.0; ACTION_DIM];
        r.copy_from_slice(raw);
        let p = softmax(&r[..3]);
        Self {
            raw: r,
            action: [p[0], p[1], p[2], r[3].tanh(), r[4].tanh()],
        }
    }

    pub fn probs(&self) -> [f64; 3] {
        [self.action[0], self.action[1], self.action[2]]
    }

    /// Argmax maneuver with scaled continuous parameters.
    pub fn command(&self) -> ControlCommand {
        decode(&self.action, argmax3(&self.probs()))
    }
}

/// Command for a critic-space action vector with the given maneuver.
pub fn decode(action: &[f64; ACTION_DIM], maneuver: usize) -> ControlCommand {
    ControlCommand {
        maneuver: Maneuver::from_index(maneuver).expect("three maneuvers"),
        heading: HEADING_BOUND * action[3],
        accel: ACCEL_BOUND * action[4],
    }
}

pub(crate) fn argmax3(p: &[f64; 3]) -> usize {
    let mut best = 0;
    for k in 1..3 {
        if p[k] > p[best] {
            best = k;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct Actor {
    pub net: Mlp,
}

impl Actor {
    pub fn zeros(state_dim: usize, hidden: &[usize]) -> Self {
        Self {
            net: Mlp::zeros("actor", &sizes(state_dim, hidden, ACTION_DIM), Activation::Relu, Activation::Identity),
        }
    }

    pub fn new<R: Rng + ?Sized>(state_dim: usize, hidden: &[usize], rng: &mut R) -> Self {
        Self {
            net: Mlp::new(
                "actor",
                &sizes(state_dim, hidden, ACTION_DIM),
                Activation::Relu,
                Activation::Identity,
                rng,
            ),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn forward(&self, state: &[f64]) -> ActorOutput {
        ActorOutput::from_raw(&self.net.forward(state))
    }

    pub fn forward_cached(&self, state: &[f64]) -> (ActorOutput, MlpCache) {
        let cache = self.net.forward_cached(state);
        (ActorOutput::from_raw(cache.output()), cache)
    }

    /// Accumulate parameter gradients for `d_action`, the upstream gradient
    /// with respect to `out.action`.
    pub fn backward(&self, cache: &MlpCache, out: &ActorOutput, d_action: &[f64; ACTION_DIM], grads: &mut [f64]) {
        let dp = softmax_backward(&out.action[..3], &d_action[..3]);
        let mut draw = [0.0; ACTION_DIM];
        draw[..3].copy_from_slice(&dp);
        for k in 3..ACTION_DIM {
            draw[k] = d_action[k] * (1.0 - out.action[k] * out.action[k]);
        }
        self.net.backward(cache, &draw, grads);
    }
}

impl Parameterized for Actor {
    fn layout(&self) -> &ParamLayout {
        self.net.layout()
    }
    fn params(&self) -> &[f64] {
        self.net.params()
    }
    fn params_mut(&mut self) -> &mut [f64] {
        self.net.params_mut()
    }
}

/// Q(s, a) over the concatenated state and critic-space action.
#[derive(Clone, Debug, PartialEq)]
pub struct Critic {
    pub net: Mlp,
}

impl Critic {
    pub fn new<R: Rng + ?Sized>(name: &str, state_dim: usize, hidden: &[usize], rng: &mut R) -> Self {
        Self {
            net: Mlp::new(
                name,
                &sizes(state_dim + ACTION_DIM, hidden, 1),
                Activation::Relu,
                Activation::Identity,
                rng,
            ),
        }
    }

    pub fn q(&self, state: &[f64], action: &[f64; ACTION_DIM]) -> f64 {
        self.net.forward(&join(state, action))[0]
    }

    pub fn q_cached(&self, state: &[f64], action: &[f64; ACTION_DIM]) -> (f64, MlpCache) {
        let cache = self.net.forward_cached(&join(state, action));
        (cache.output()[0], cache)
    }

    /// Accumulate parameter gradients for `dq`; returns dQ/da scaled by `dq`.
    pub fn backward(&self, cache: &MlpCache, dq: f64, grads: &mut [f64]) -> [f64; ACTION_DIM] {
        let dx = self.net.backward(cache, &[dq], grads);
        let mut da = [0.0; ACTION_DIM];
        da.copy_from_slice(&dx[dx.len() - ACTION_DIM..]);
        da
    }
}

impl Parameterized for Critic {
    fn layout(&self) -> &ParamLayout {
        self.net.layout()
    }
    fn params(&self) -> &[f64] {
        self.net.params()
    }
    fn params_mut(&mut self) -> &mut [f64] {
        self.net.params_mut()
    }
}

fn sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut s = Vec::with_capacity(hidden.len() + 2);
    s.push(input);
    s.extend_from_slice(hidden);
    s.push(output);
    s
}

fn join(state: &[f64], action: &[f64; ACTION_DIM]) -> Vec<f64> {
    let mut x = Vec::with_capacity(state.len() + ACTION_DIM);
    x.extend_from_slice(state);
    x.extend_from_slice(action);
    x
}
