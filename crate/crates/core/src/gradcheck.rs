//! Finite-difference verification of every hand-written backward pass.
//!
//! Each case builds a random layer (or a tiny full model), reduces its output
//! to a scalar with a random weighting `Σ rᵢ·outᵢ` (BCE for the full model),
//! and compares the analytic gradient of every input and parameter entry with
//! a central difference of step `1e-6 · max(1, |θ|)`. The error of a case is
//! `‖g_analytic − g_fd‖∞ / max(1, ‖g_fd‖∞)`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::layers::{
    concat, concat_backward, conv_block_backward, conv_block_forward, dense_backward,
    dense_forward, dropout_backward, dropout_forward, flatten, lstm_backward, lstm_forward,
    maxpool_backward, maxpool_forward, unflatten, Activation, ConvBlockParams, DenseParams,
    LstmParams, Mode,
};
use crate::model::{ArchitectureConfig, HybridModel};
use crate::optim::bce_loss;
use crate::rng::Rng;
use crate::tensor::Tensor;

pub const DEFAULT_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Conv,
    MaxPool,
    Flatten,
    Concat,
    Lstm,
    DenseRelu,
    DenseLinear,
    Dropout,
    /// Full model, 8 features, kernel 1.
    ModelF8,
    /// Full model, 22 features, kernel 2.
    ModelF22,
}

impl CheckKind {
    pub const ALL: [CheckKind; 10] = [
        CheckKind::Conv,
        CheckKind::MaxPool,
        CheckKind::Flatten,
        CheckKind::Concat,
        CheckKind::Lstm,
        CheckKind::DenseRelu,
        CheckKind::DenseLinear,
        CheckKind::Dropout,
        CheckKind::ModelF8,
        CheckKind::ModelF22,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Conv => "conv+relu",
            CheckKind::MaxPool => "maxpool",
            CheckKind::Flatten => "flatten",
            CheckKind::Concat => "concat",
            CheckKind::Lstm => "lstm",
            CheckKind::DenseRelu => "dense+relu",
            CheckKind::DenseLinear => "dense",
            CheckKind::Dropout => "dropout",
            CheckKind::ModelF8 => "model F=8 k=1",
            CheckKind::ModelF22 => "model F=22 k=2",
        }
    }

    /// Architecture used by the full-model checks.
    pub fn model_config(self) -> Option<ArchitectureConfig> {
        let tiny = |f: usize, k: usize| {
            ArchitectureConfig::new(f)
                .with_conv(2, k)
                .with_lstm_units(vec![2, 3])
                .with_dense_units(4)
        };
        match self {
            CheckKind::ModelF8 => Some(tiny(8, 1)),
            CheckKind::ModelF22 => Some(tiny(22, 2)),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub kind: CheckKind,
    pub name: String,
    pub cases: usize,
    pub max_rel_error: f64,
    pub worst_seed: u64,
    pub passed: bool,
}

/// Runs `cases` seeded configurations of every kind.
pub fn run_all(cases: usize, base_seed: u64, tolerance: f64) -> Result<Vec<CheckSummary>> {
    CheckKind::ALL
        .iter()
        .map(|&k| run_kind(k, cases, base_seed, tolerance))
        .collect()
}

pub fn run_kind(kind: CheckKind, cases: usize, base_seed: u64, tolerance: f64) -> Result<CheckSummary> {
    let mut worst = 0.0f64;
    let mut worst_seed = base_seed;
    for i in 0..cases as u64 {
        let seed = base_seed.wrapping_add(i);
        let e = check_case(kind, seed)?;
        if e > worst || e.is_nan() {
            worst = e;
            worst_seed = seed;
        }
    }
    Ok(CheckSummary {
        kind,
        name: kind.name().to_string(),
        cases,
        max_rel_error: worst,
        worst_seed,
        passed: worst <= tolerance,
    })
}

/// Error of one seeded configuration.
pub fn check_case(kind: CheckKind, seed: u64) -> Result<f64> {
    let mut rng = Rng::new(seed).split(kind as u64);
    match kind {
        CheckKind::Conv => conv_case(&mut rng),
        CheckKind::MaxPool => pool_case(&mut rng),
        CheckKind::Flatten => flatten_case(&mut rng),
        CheckKind::Concat => concat_case(&mut rng),
        CheckKind::Lstm => lstm_case(&mut rng),
        CheckKind::DenseRelu => dense_case(&mut rng, Activation::Relu),
        CheckKind::DenseLinear => dense_case(&mut rng, Activation::None),
        CheckKind::Dropout => dropout_case(&mut rng, seed),
        CheckKind::ModelF8 | CheckKind::ModelF22 => {
            model_case(&mut rng, kind.model_config().expect("model kind"))
        }
    }
}

fn between(rng: &mut Rng, lo: usize, hi: usize) -> usize {
    lo + rng.below(hi - lo + 1)
}

fn random(rng: &mut Rng, shape: &[usize]) -> Result<Tensor> {
    Tensor::rand_uniform(rng, shape, -1.0, 1.0)
}

fn weighted_sum(out: &Tensor, r: &Tensor) -> f64 {
    out.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

/// Central differences of `f` over every entry of `arrays`, compared with
/// `analytic` (same layout).
fn fd_error(
    arrays: &[Tensor],
    analytic: &[Tensor],
    f: &dyn Fn(&[Tensor]) -> Result<f64>,
) -> Result<f64> {
    assert_eq!(arrays.len(), analytic.len());
    let mut work = arrays.to_vec();
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for a in 0..arrays.len() {
        assert_eq!(arrays[a].shape(), analytic[a].shape());
        for j in 0..arrays[a].len() {
            let theta = arrays[a].data()[j];
            let h = 1e-6 * theta.abs().max(1.0);
            work[a].set_flat(j, theta + h)?;
            let up = f(&work)?;
            work[a].set_flat(j, theta - h)?;
            let down = f(&work)?;
            work[a].set_flat(j, theta)?;
            let fd = (up - down) / (2.0 * h);
            diff = diff.max((analytic[a].data()[j] - fd).abs());
            scale = scale.max(fd.abs());
        }
    }
    Ok(diff / scale.max(1.0))
}

fn conv_case(rng: &mut Rng) -> Result<f64> {
    let (cin, k, cout) = (between(rng, 1, 3), between(rng, 1, 3), between(rng, 1, 4));
    let len = between(rng, k, k + 5);
    let x = random(rng, &[len, cin])?;
    let kern = random(rng, &[cout, k, cin])?;
    let bias = random(rng, &[cout])?;
    let r = random(rng, &[len - k + 1, cout])?;
    let p = ConvBlockParams::new(kern.clone(), bias.clone())?;
    let (_, cache) = conv_block_forward(&x, &p)?;
    let (dx, g) = conv_block_backward(cache, &r)?;
    let f = |a: &[Tensor]| {
        let p = ConvBlockParams::new(a[1].clone(), a[2].clone())?;
        Ok(weighted_sum(&conv_block_forward(&a[0], &p)?.0, &r))
    };
    fd_error(&[x, kern, bias], &[dx, g.kernels, g.bias], &f)
}

fn pool_case(rng: &mut Rng) -> Result<f64> {
    let (pool, ch) = (between(rng, 2, 3), between(rng, 1, 3));
    let len = between(rng, pool, 10);
    let x = random(rng, &[len, ch])?;
    let r = random(rng, &[len / pool, ch])?;
    let (_, cache) = maxpool_forward(&x, pool)?;
    let dx = maxpool_backward(cache, &r)?;
    let f = |a: &[Tensor]| Ok(weighted_sum(&maxpool_forward(&a[0], pool)?.0, &r));
    fd_error(&[x], &[dx], &f)
}

fn flatten_case(rng: &mut Rng) -> Result<f64> {
    let shape = [between(rng, 1, 5), between(rng, 1, 4)];
    let x = random(rng, &shape)?;
    let r = random(rng, &[shape[0] * shape[1]])?;
    let (_, cache) = flatten(&x);
    let dx = unflatten(cache, &r)?;
    let f = |a: &[Tensor]| Ok(weighted_sum(&flatten(&a[0]).0, &r));
    fd_error(&[x], &[dx], &f)
}

fn concat_case(rng: &mut Rng) -> Result<f64> {
    let (m, n) = (between(rng, 1, 6), between(rng, 1, 6));
    let a = random(rng, &[m])?;
    let b = random(rng, &[n])?;
    let r = random(rng, &[m + n])?;
    let (_, cache) = concat(&a, &b)?;
    let (da, db) = concat_backward(cache, &r)?;
    let f = |t: &[Tensor]| Ok(weighted_sum(&concat(&t[0], &t[1])?.0, &r));
    fd_error(&[a, b], &[da, db], &f)
}

fn lstm_case(rng: &mut Rng) -> Result<f64> {
    let (steps, d, h) = (between(rng, 1, 5), between(rng, 1, 3), between(rng, 1, 3));
    let x = random(rng, &[steps, d])?;
    let mut arrays = vec![x];
    for _ in 0..4 {
        arrays.push(random(rng, &[h, d])?);
        arrays.push(random(rng, &[h, h])?);
        arrays.push(random(rng, &[h])?);
    }
    let r = random(rng, &[steps, h])?;
    let params = |a: &[Tensor]| {
        let pick = |off: usize| -> [Tensor; 4] { std::array::from_fn(|g| a[1 + 3 * g + off].clone()) };
        LstmParams::new(pick(0), pick(1), pick(2))
    };
    let p = params(&arrays)?;
    let out = lstm_forward(&arrays[0], &p, None, None)?;
    let (dx, g) = lstm_backward(out.cache, &r)?;
    let mut analytic = vec![dx];
    for i in 0..4 {
        analytic.push(g.w[i].clone());
        analytic.push(g.u[i].clone());
        analytic.push(g.b[i].clone());
    }
    let f = |a: &[Tensor]| {
        let p = params(a)?;
        Ok(weighted_sum(&lstm_forward(&a[0], &p, None, None)?.sequence, &r))
    };
    fd_error(&arrays, &analytic, &f)
}

fn dense_case(rng: &mut Rng, act: Activation) -> Result<f64> {
    let (u, v) = (between(rng, 1, 5), between(rng, 1, 6));
    let x = random(rng, &[v])?;
    let w = random(rng, &[u, v])?;
    let b = random(rng, &[u])?;
    let r = random(rng, &[u])?;
    let p = DenseParams::new(w.clone(), b.clone())?;
    let (_, cache) = dense_forward(&x, &p, act)?;
    let (dx, g) = dense_backward(cache, &r)?;
    let f = |a: &[Tensor]| {
        let p = DenseParams::new(a[1].clone(), a[2].clone())?;
        Ok(weighted_sum(&dense_forward(&a[0], &p, act)?.0, &r))
    };
    fd_error(&[x, w, b], &[dx, g.weights, g.bias], &f)
}

fn dropout_case(rng: &mut Rng, seed: u64) -> Result<f64> {
    let n = between(rng, 1, 12);
    let rate = 0.8 * rng.uniform();
    let x = random(rng, &[n])?;
    let r = random(rng, &[n])?;
    let mask_rng = || Rng::new(seed).split(1 << 20);
    let (_, cache) = dropout_forward(&x, rate, Mode::Train, &mut mask_rng())?;
    let dx = dropout_backward(cache, &r)?;
    let f = |a: &[Tensor]| {
        Ok(weighted_sum(
            &dropout_forward(&a[0], rate, Mode::Train, &mut mask_rng())?.0,
            &r,
        ))
    };
    fd_error(&[x], &[dx], &f)
}

fn model_case(rng: &mut Rng, cfg: ArchitectureConfig) -> Result<f64> {
    let mut model = HybridModel::<f64>::build(cfg.clone(), rng.below(1 << 30) as u64)?;
    // non-zero biases exercise every bias path
    for t in model.params.tensors_mut() {
        *t = Tensor::rand_uniform(rng, t.shape(), -0.5, 0.5)?;
    }
    let x: Vec<f64> = (0..cfg.input_features).map(|_| rng.uniform()).collect();
    let y = [rng.below(2) as u8];
    let mask_seed = rng.below(1 << 30) as u64;

    let bundle = model.forward(&x, Mode::Train, &mut Rng::new(mask_seed))?;
    let (_, dz) = bce_loss(&[bundle.probability], &y)?;
    let grads = bundle.backward(dz.data()[0])?;
    let analytic: Vec<Tensor> = grads.tensors().into_iter().cloned().collect();
    let arrays: Vec<Tensor> = model.params.tensors().into_iter().cloned().collect();

    let f = |a: &[Tensor]| {
        let mut m = model.clone();
        for (dst, src) in m.params.tensors_mut().into_iter().zip(a) {
            dst.clone_from(src);
        }
        let p = m.forward(&x, Mode::Train, &mut Rng::new(mask_seed))?.probability;
        Ok(bce_loss(&[p], &y)?.0)
    };
    fd_error(&arrays, &analytic, &f)
}
