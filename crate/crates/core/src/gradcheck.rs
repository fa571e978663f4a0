//! Finite-difference verification of the analytic gradients.
//!
//! Each parameter is nudged by `±h` and the central difference of the full
//! batch loss is compared with backpropagation. MAE and relu make the loss
//! piecewise linear, so a kink can fall inside `[θ−h, θ+h]`; when the two
//! one-sided slopes disagree the check is repeated with `h/100` and the
//! best of central, forward and backward differences is kept.

use serde::Serialize;

use crate::autoencoder::{AutoencoderConfig, AutoencoderModel, TaskTarget};
use crate::data::Task;
use crate::numeric::{softmax_crossentropy, Activation, LayerParams, Matrix, Rng};
use crate::Result;

pub const DEFAULT_STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

/// `|a − n| / max(|a|, |n|, 1e-6)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NetKind {
    Autoencoder,
    MultitaskRegression,
    MultitaskClassification,
    Mlp,
}

#[derive(Clone, Debug, Serialize)]
pub struct NetCheck {
    pub kind: NetKind,
    pub dims: Vec<usize>,
    pub params: usize,
    pub max_relative_error: f64,
    pub kink_retries: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradcheckReport {
    pub nets: Vec<NetCheck>,
    pub max_relative_error: f64,
    pub params_checked: usize,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.max_relative_error < TOLERANCE
    }
}

/// Compares `grads` against finite differences of `loss` for every entry of
/// every buffer. Returns (max relative error, kink retries).
pub fn check_buffers<M>(
    model: &mut M,
    buffers: impl Fn(&mut M) -> Vec<&mut [f64]>,
    loss: impl Fn(&M) -> f64,
    grads: &[Vec<f64>],
    h: f64,
) -> (f64, usize) {
    let mut worst = 0.0f64;
    let mut retries = 0;
    for (b, g) in grads.iter().enumerate() {
        for (j, &analytic) in g.iter().enumerate() {
            let mut eval = |delta: f64| {
                let orig = buffers(model)[b][j];
                buffers(model)[b][j] = orig + delta;
                let v = loss(model);
                buffers(model)[b][j] = orig;
                v
            };
            let f0 = eval(0.0);
            let fp = eval(h);
            let fm = eval(-h);
            let mut err = relative_error(analytic, (fp - fm) / (2.0 * h));
            if err >= TOLERANCE {
                let forward = (fp - f0) / h;
                let backward = (f0 - fm) / h;
                if relative_error(forward, backward) >= TOLERANCE {
                    retries += 1;
                    let s = h / 100.0;
                    let (fp, fm) = (eval(s), eval(-s));
                    err = [(fp - fm) / (2.0 * s), (fp - f0) / s, (f0 - fm) / s]
                        .into_iter()
                        .map(|n| relative_error(analytic, n))
                        .fold(f64::INFINITY, f64::min);
                }
            }
            worst = worst.max(err);
        }
    }
    (worst, retries)
}

/// Plain relu MLP with an identity last layer and softmax cross-entropy.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub layers: Vec<LayerParams>,
}

impl Mlp {
    pub fn new(dims: &[usize], rng: &mut Rng) -> Result<Self> {
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i + 2 == dims.len() {
                    Activation::Identity
                } else {
                    Activation::Relu
                };
                LayerParams::he_init(w[0], w[1], act, rng)
            })
            .collect::<Result<_>>()?;
        Ok(Mlp { layers })
    }

    pub fn loss(&self, x: &Matrix, labels: &[usize]) -> Result<f64> {
        let mut h = x.clone();
        for l in &self.layers {
            h = l.apply(&h)?;
        }
        Ok(softmax_crossentropy(&h, labels)?.0)
    }

    pub fn loss_and_gradients(&self, x: &Matrix, labels: &[usize]) -> Result<(f64, Vec<Vec<f64>>)> {
        let mut h = x.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let (out, cache) = l.forward(&h)?;
            caches.push(cache);
            h = out;
        }
        let (loss, mut upstream) = softmax_crossentropy(&h, labels)?;
        let mut grads = vec![Vec::new(); 2 * self.layers.len()];
        for (i, (l, cache)) in self.layers.iter().zip(&caches).enumerate().rev() {
            let g = l.backward(cache, &upstream)?;
            grads[2 * i] = g.weights.into_vec();
            grads[2 * i + 1] = g.biases;
            upstream = g.input;
        }
        Ok((loss, grads))
    }

    fn buffers_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.buffers_mut())
            .collect()
    }
}

/// Zero biases let a fully dead layer feed exact zeros into the next relu,
/// which puts the check on a kink; buffers alternate weights and biases.
fn randomize_biases(buffers: Vec<&mut [f64]>, rng: &mut Rng) {
    for b in buffers.into_iter().skip(1).step_by(2) {
        for v in b.iter_mut() {
            *v = rng.uniform(-0.1, 0.1);
        }
    }
}

fn check_autoencoder(kind: NetKind, rng: &mut Rng) -> Result<NetCheck> {
    let n = 4 + rng.below(5);
    let input = 2 + rng.below(9);
    let hidden = [1 + rng.below(10), 1 + rng.below(10), 1 + rng.below(10)];
    let latent = 1 + rng.below(10);
    let output = if rng.below(2) == 0 {
        Activation::Relu
    } else {
        Activation::Identity
    };
    let mut cfg = AutoencoderConfig {
        encoder_hidden: hidden,
        ..AutoencoderConfig::new(input, latent)
    }
    .with_output_activation(output);
    let lambda = rng.uniform(0.2, 2.0);
    let classes = 2 + rng.below(4);
    cfg = match kind {
        NetKind::MultitaskRegression => cfg.with_multitask(Task::Regression, 1, lambda),
        NetKind::MultitaskClassification => {
            cfg.with_multitask(Task::Classification, classes, lambda)
        }
        _ => cfg,
    };
    let mut model = AutoencoderModel::build(cfg, rng)?;
    randomize_biases(model.buffers_mut(), rng);
    let x = Matrix::from_vec(n, input, (0..n * input).map(|_| rng.next_f64()).collect())?;
    let y_reg: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
    let y_cls: Vec<usize> = (0..n).map(|_| rng.below(classes)).collect();
    let target = match kind {
        NetKind::MultitaskRegression => Some(TaskTarget::Regression(&y_reg)),
        NetKind::MultitaskClassification => Some(TaskTarget::Classes(&y_cls)),
        _ => None,
    };
    let (_, grads) = model.loss_and_gradients(&x, target)?;
    let (max_relative_error, kink_retries) = check_buffers(
        &mut model,
        |m| m.buffers_mut(),
        |m| m.loss(&x, target).expect("shapes checked").total,
        &grads.0,
        DEFAULT_STEP,
    );
    Ok(NetCheck {
        kind,
        dims: model.layer_dims(),
        params: model.param_count(),
        max_relative_error,
        kink_retries,
    })
}

fn check_mlp(rng: &mut Rng) -> Result<NetCheck> {
    let dims = vec![7, 5, 3];
    let mut mlp = Mlp::new(&dims, rng)?;
    let n = 6;
    let x = Matrix::from_vec(n, 7, (0..n * 7).map(|_| rng.normal()).collect())?;
    let labels: Vec<usize> = (0..n).map(|_| rng.below(3)).collect();
    let (_, grads) = mlp.loss_and_gradients(&x, &labels)?;
    let params = grads.iter().map(Vec::len).sum();
    let (max_relative_error, kink_retries) = check_buffers(
        &mut mlp,
        |m| m.buffers_mut(),
        |m| m.loss(&x, &labels).expect("shapes checked"),
        &grads,
        DEFAULT_STEP,
    );
    Ok(NetCheck {
        kind: NetKind::Mlp,
        dims,
        params,
        max_relative_error,
        kink_retries,
    })
}

/// Checks `count` random small networks, cycling through plain
/// autoencoders, both multitask variants and a 7→5→3 classifier.
pub fn run_suite(count: usize, seed: u64) -> Result<GradcheckReport> {
    let kinds = [
        NetKind::Autoencoder,
        NetKind::MultitaskRegression,
        NetKind::MultitaskClassification,
        NetKind::Mlp,
    ];
    let mut nets = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = Rng::derive(seed, i as u64);
        let check = match kinds[i % kinds.len()] {
            NetKind::Mlp => check_mlp(&mut rng)?,
            kind => check_autoencoder(kind, &mut rng)?,
        };
        nets.push(check);
    }
    Ok(GradcheckReport {
        max_relative_error: nets
            .iter()
            .map(|n| n.max_relative_error)
            .fold(0.0, f64::max),
        params_checked: nets.iter().map(|n| n.params).sum(),
        nets,
    })
}
