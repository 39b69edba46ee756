//! Shared oracles for the integration and acceptance targets.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rowdrive_core::agent::{Actor, Critic, ACTION_DIM};
use rowdrive_core::geometry::OrientedRect;
use rowdrive_core::intention::{StaConfig, StaModel};
use rowdrive_core::row::{overlap_area, ARowRegion};
pub mod hand;

use rowdrive_core::neural::{dense_backward, dense_forward, dot, softmax, softmax_backward, LstmCell, Parameterized, Tensor2};

pub const FD_STEP: f64 = 1e-6;
pub const FD_TOL: f64 = 1e-3;
/// Gradients below this magnitude are compared on an absolute scale.
pub const FD_FLOOR: f64 = 1e-4;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR)
}

/// Central difference of `f` at `x` along coordinate `i`.
pub fn central_diff<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], i: usize) -> f64 {
    let mut p = x.to_vec();
    p[i] = x[i] + FD_STEP;
    let up = f(&p);
    p[i] = x[i] - FD_STEP;
    let down = f(&p);
    (up - down) / (2.0 * FD_STEP)
}

#[derive(Clone, Debug)]
pub struct GradReport {
    pub op: &'static str,
    pub checks: usize,
    pub worst: f64,
}

impl GradReport {
    fn new(op: &'static str) -> Self {
        Self { op, checks: 0, worst: 0.0 }
    }

    fn record(&mut self, analytic: f64, numeric: f64) {
        self.checks += 1;
        self.worst = self.worst.max(rel_err(analytic, numeric));
    }

    pub fn passed(&self, min_checks: usize) -> bool {
        self.checks >= min_checks && self.worst <= FD_TOL
    }
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, s: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-s..s)).collect()
}

pub fn check_dense(seed: u64, trials: usize) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = GradReport::new("dense");
    for _ in 0..trials {
        let (n, m) = (rng.random_range(1..6), rng.random_range(1..6));
        let w = uniform(&mut rng, n * m, 1.0);
        let b = uniform(&mut rng, m, 1.0);
        let x = uniform(&mut rng, n, 1.0);
        let r = uniform(&mut rng, m, 1.0);
        let loss = |w: &[f64], b: &[f64], x: &[f64]| {
            let wt = Tensor2::from_vec(m, n, w.to_vec()).unwrap();
            dot(&r, &dense_forward(&wt, b, x).unwrap())
        };
        let g = dense_backward(&Tensor2::from_vec(m, n, w.clone()).unwrap(), &x, &r).unwrap();
        let i = rng.random_range(0..n * m);
        rep.record(g.dw.data()[i], central_diff(|p| loss(p, &b, &x), &w, i));
        let j = rng.random_range(0..m);
        rep.record(g.db[j], central_diff(|p| loss(&w, p, &x), &b, j));
        let k = rng.random_range(0..n);
        rep.record(g.dx[k], central_diff(|p| loss(&w, &b, p), &x, k));
    }
    rep
}

pub fn check_softmax(seed: u64, trials: usize) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = GradReport::new("softmax");
    for _ in 0..trials {
        let n = rng.random_range(2..8);
        let z = uniform(&mut rng, n, 4.0);
        let r = uniform(&mut rng, n, 1.0);
        let g = softmax_backward(&softmax(&z), &r);
        let i = rng.random_range(0..n);
        rep.record(g[i], central_diff(|p| dot(&r, &softmax(p)), &z, i));
    }
    rep
}

pub fn check_lstm(seed: u64, trials: usize) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = GradReport::new("lstm");
    for _ in 0..trials {
        let (n, h) = (rng.random_range(1..5), rng.random_range(1..5));
        let cell = LstmCell::new(n, h, &mut rng);
        let spec = cell.spec;
        let x = uniform(&mut rng, n, 1.0);
        let hp = uniform(&mut rng, h, 1.0);
        let cp = uniform(&mut rng, h, 1.0);
        let (rh, rc) = (uniform(&mut rng, h, 1.0), uniform(&mut rng, h, 1.0));
        let loss = |params: &[f64], x: &[f64], hp: &[f64], cp: &[f64]| {
            let (ht, cache) = spec.step(params, x, hp, cp);
            dot(&rh, &ht) + dot(&rc, &cache.c)
        };
        let params = cell.params().to_vec();
        let (_, cache) = spec.step(&params, &x, &hp, &cp);
        let mut grads = vec![0.0; params.len()];
        let (dx, dh, dc) = spec.backward(&params, &cache, &rh, &rc, &mut grads);
        let i = rng.random_range(0..params.len());
        rep.record(grads[i], central_diff(|p| loss(p, &x, &hp, &cp), &params, i));
        let k = rng.random_range(0..n);
        rep.record(dx[k], central_diff(|p| loss(&params, p, &hp, &cp), &x, k));
        let k = rng.random_range(0..h);
        rep.record(dh[k], central_diff(|p| loss(&params, &x, p, &cp), &hp, k));
        rep.record(dc[k], central_diff(|p| loss(&params, &x, &hp, p), &cp, k));
    }
    rep
}

fn small_sta(rng: &mut ChaCha8Rng) -> StaModel {
    let cfg = StaConfig {
        regions: 4,
        region_dim: 3,
        self_dim: 2,
        hidden: 5,
        attention_dim: 3,
        steps: 4,
    };
    let mut m = StaModel::new(cfg, rng);
    // Move every weight off its initial value so no block sits at zero.
    for p in m.params_mut() {
        *p += rng.random_range(-0.3..0.3);
    }
    m
}

/// Checks on STA parameters whose block name starts with `prefix`, through
/// the full classification loss.
fn check_sta_blocks(op: &'static str, prefix: &str, seed: u64, trials: usize) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = GradReport::new(op);
    for _ in 0..trials {
        let model = small_sta(&mut rng);
        let cfg = *model.config();
        let seq = uniform(&mut rng, cfg.steps * cfg.frame_width(), 1.0);
        let label = rng.random_range(0..3);
        let mut grads = vec![0.0; model.param_count()];
        model.loss_and_grad(&seq, label, &mut grads);
        let candidates: Vec<usize> = model
            .layout()
            .blocks()
            .iter()
            .filter(|b| b.name.starts_with(prefix))
            .flat_map(|b| b.range())
            .collect();
        let i = candidates[rng.random_range(0..candidates.len())];
        let base = model.params().to_vec();
        let mut probe = model.clone();
        let numeric = central_diff(
            |p| {
                probe.set_params(p).unwrap();
                let mut scratch = vec![0.0; p.len()];
                probe.loss_and_grad(&seq, label, &mut scratch)
            },
            &base,
            i,
        );
        rep.record(grads[i], numeric);
    }
    rep
}

pub fn check_spatial_attention(seed: u64, trials: usize) -> GradReport {
    check_sta_blocks("spatial attention", "spatial.", seed, trials)
}

pub fn check_temporal_attention(seed: u64, trials: usize) -> GradReport {
    check_sta_blocks("temporal attention", "temporal.", seed, trials)
}

pub fn check_actor(seed: u64, trials: usize) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = GradReport::new("actor");
    for _ in 0..trials {
        let dim = rng.random_range(2..7);
        let mut actor = Actor::new(dim, &[6, 5], &mut rng);
        for p in actor.params_mut() {
            *p += rng.random_range(-0.2..0.2);
        }
        let s = uniform(&mut rng, dim, 1.0);
        let r: [f64; ACTION_DIM] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let (out, cache) = actor.forward_cached(&s);
        let mut grads = vec![0.0; actor.param_count()];
        actor.backward(&cache, &out, &r, &mut grads);
        let base = actor.params().to_vec();
        let i = rng.random_range(0..base.len());
        let mut probe = actor.clone();
        let numeric = central_diff(
            |p| {
                probe.set_params(p).unwrap();
                dot(&r, &probe.forward(&s).action)
            },
            &base,
            i,
        );
        rep.record(grads[i], numeric);
    }
    rep
}

pub fn check_critic(seed: u64, trials: usize) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = GradReport::new("critic");
    for _ in 0..trials {
        let dim = rng.random_range(2..7);
        let critic = Critic::new("q", dim, &[6, 5], &mut rng);
        let s = uniform(&mut rng, dim, 1.0);
        let a: [f64; ACTION_DIM] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let (_, cache) = critic.q_cached(&s, &a);
        let mut grads = vec![0.0; critic.param_count()];
        let da = critic.backward(&cache, 1.0, &mut grads);
        let base = critic.params().to_vec();
        let i = rng.random_range(0..base.len());
        let mut probe = critic.clone();
        let numeric = central_diff(
            |p| {
                probe.set_params(p).unwrap();
                probe.q(&s, &a)
            },
            &base,
            i,
        );
        rep.record(grads[i], numeric);
        let k = rng.random_range(0..ACTION_DIM);
        let numeric = central_diff(|p| critic.q(&s, &p.try_into().unwrap()), &a, k);
        rep.record(da[k], numeric);
    }
    rep
}

/// Every gradient suite with `trials` randomized instances each.
pub fn all_gradient_checks(seed: u64, trials: usize) -> Vec<GradReport> {
    vec![
        check_dense(seed, trials),
        check_lstm(seed + 1, trials),
        check_softmax(seed + 2, trials),
        check_spatial_attention(seed + 3, trials),
        check_temporal_attention(seed + 4, trials),
        check_actor(seed + 5, trials),
        check_critic(seed + 6, trials),
    ]
}

/// Area of `fp ∩ region` from a `side × side` grid laid over the footprint
/// in its own frame and shifted by `offset ∈ [0,1)²` cells.
pub fn grid_overlap(fp: &OrientedRect, region: &ARowRegion, side: usize, offset: (f64, f64)) -> f64 {
    let (s, c) = fp.heading.sin_cos();
    let (du, dv) = (fp.length / side as f64, fp.width / side as f64);
    let mut hits = 0usize;
    for i in 0..side {
        let u = -0.5 * fp.length + (i as f64 + offset.0) * du;
        for j in 0..side {
            let v = -0.5 * fp.width + (j as f64 + offset.1) * dv;
            let x = fp.cx + u * c - v * s;
            let y = fp.cy + u * s + v * c;
            if x >= region.x_min && x <= region.x_max && y >= region.y_min && y <= region.y_max {
                hits += 1;
            }
        }
    }
    fp.length * fp.width * hits as f64 / (side * side) as f64
}

/// Random footprint/region pairs whose overlap covers at least
/// `min_fraction` of the footprint, with a grid offset for each.
pub fn overlap_pairs(seed: u64, count: usize, min_fraction: f64) -> Vec<(OrientedRect, ARowRegion, (f64, f64))> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let fp = OrientedRect::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(2.0..8.0),
            rng.random_range(1.0..3.0),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        let x_min = rng.random_range(-6.0..4.0);
        let y_min = rng.random_range(-4.0..2.0);
        let region = ARowRegion {
            x_min,
            x_max: x_min + rng.random_range(0.5..15.0),
            y_min,
            y_max: y_min + rng.random_range(0.5..6.0),
            owner_id: 1,
        };
        if overlap_area(&fp, &region) >= min_fraction * fp.area() {
            out.push((fp, region, (rng.random(), rng.random())));
        }
    }
    out
}
