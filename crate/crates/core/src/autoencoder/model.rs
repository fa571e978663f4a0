use serde::{Deserialize, Serialize};

use crate::data::{EmbeddingTable, Task};
use crate::numeric::{
    mae_loss, softmax_crossentropy, Activation, LayerCache, LayerParams, Matrix, Rng,
};
use crate::{Error, Result};

pub const DEFAULT_ENCODER_HIDDEN: [usize; 3] = [128, 64, 40];
pub const DEFAULT_LATENT_DIM: usize = 32;

/// Rows per block when encoding large inputs.
const INFERENCE_BLOCK: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultitaskConfig {
    pub task: Task,
    /// Head width: number of classes for classification, 1 for regression.
    pub head_classes: usize,
    /// Weight of the task loss in `reconstruction + lambda · task`.
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderConfig {
    pub input_dim: usize,
    pub latent_dim: usize,
    pub encoder_hidden: [usize; 3],
    /// Activation of the reconstruction layer; relu or identity.
    #[serde(default = "default_output_activation")]
    pub output_activation: Activation,
    pub multitask: Option<MultitaskConfig>,
}

fn default_output_activation() -> Activation {
    Activation::Identity
}

impl AutoencoderConfig {
    pub fn new(input_dim: usize, latent_dim: usize) -> Self {
        Self {
            input_dim,
            latent_dim,
            encoder_hidden: DEFAULT_ENCODER_HIDDEN,
            output_activation: default_output_activation(),
            multitask: None,
        }
    }

    pub fn with_output_activation(mut self, activation: Activation) -> Self {
        self.output_activation = activation;
        self
    }

    pub fn with_multitask(mut self, task: Task, head_classes: usize, lambda: f64) -> Self {
        self.multitask = Some(MultitaskConfig {
            task,
            head_classes: if task == Task::Regression {
                1
            } else {
                head_classes
            },
            lambda,
        });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.latent_dim == 0 || self.encoder_hidden.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "autoencoder dimensions must be >= 1: {self:?}"
            )));
        }
        if self.output_activation == Activation::Softmax {
            return Err(Error::InvalidArgument(
                "reconstruction layer must be relu or identity".into(),
            ));
        }
        if let Some(mt) = &self.multitask {
            if !(mt.lambda >= 0.0 && mt.lambda.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "multitask lambda must be >= 0, got {}",
                    mt.lambda
                )));
            }
            match mt.task {
                Task::Regression if mt.head_classes != 1 => {
                    return Err(Error::InvalidArgument(
                        "regression head must have width 1".into(),
                    ))
                }
                Task::Classification if mt.head_classes < 2 => {
                    return Err(Error::InvalidArgument(
                        "classification head needs at least 2 classes".into(),
                    ))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// `N, h1, h2, h3, M, h3, h2, h1, N`.
    pub fn layer_dims(&self) -> Vec<usize> {
        let [h1, h2, h3] = self.encoder_hidden;
        vec![
            self.input_dim,
            h1,
            h2,
            h3,
            self.latent_dim,
            h3,
            h2,
            h1,
            self.input_dim,
        ]
    }
}

/// Standardisation of a regression target seen by the multitask head.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetScale {
    pub mean: f64,
    pub std: f64,
}

impl TargetScale {
    pub fn fit(y: &[f64]) -> Self {
        let n = y.len().max(1) as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        Self {
            mean,
            std: if std > 0.0 { std } else { 1.0 },
        }
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn invert(&self, v: f64) -> f64 {
        v * self.std + self.mean
    }
}

/// Supervision for the multitask head.
#[derive(Clone, Copy, Debug)]
pub enum TaskTarget<'a> {
    /// Already standardised regression targets.
    Regression(&'a [f64]),
    Classes(&'a [usize]),
}

impl TaskTarget<'_> {
    pub(crate) fn len(&self) -> usize {
        match self {
            TaskTarget::Regression(y) => y.len(),
            TaskTarget::Classes(y) => y.len(),
        }
    }

    pub(crate) fn select(&self, idx: &[usize]) -> OwnedTarget {
        match self {
            TaskTarget::Regression(y) => {
                OwnedTarget::Regression(idx.iter().map(|&i| y[i]).collect())
            }
            TaskTarget::Classes(y) => OwnedTarget::Classes(idx.iter().map(|&i| y[i]).collect()),
        }
    }
}

pub(crate) enum OwnedTarget {
    Regression(Vec<f64>),
    Classes(Vec<usize>),
}

impl OwnedTarget {
    pub(crate) fn as_target(&self) -> TaskTarget<'_> {
        match self {
            OwnedTarget::Regression(y) => TaskTarget::Regression(y),
            OwnedTarget::Classes(y) => TaskTarget::Classes(y),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub reconstruction: f64,
    pub task: f64,
}

/// Gradients aligned with [`AutoencoderModel::buffers_mut`].
#[derive(Clone, Debug)]
pub struct Gradients(pub Vec<Vec<f64>>);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderModel {
    config: AutoencoderConfig,
    encoder: Vec<LayerParams>,
    decoder: Vec<LayerParams>,
    head: Option<LayerParams>,
    target_scale: Option<TargetScale>,
}

struct ForwardTrace {
    encoder: Vec<LayerCache>,
    decoder: Vec<LayerCache>,
    head: Option<LayerCache>,
    latent: Matrix,
    reconstruction: Matrix,
    head_out: Option<Matrix>,
}

impl AutoencoderModel {
    /// He-initialised model. Encoder and decoder are drawn before the head, so
    /// the same seed gives the same encoder/decoder with or without a head.
    pub fn build(config: AutoencoderConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let dims = config.layer_dims();
        let act = |i: usize| match i {
            3 => Activation::Identity,
            7 => config.output_activation,
            _ => Activation::Relu,
        };
        let mut layers = Vec::with_capacity(8);
        for i in 0..8 {
            layers.push(LayerParams::he_init(dims[i], dims[i + 1], act(i), rng)?);
        }
        let decoder = layers.split_off(4);
        let head = match &config.multitask {
            Some(mt) => {
                let act = match mt.task {
                    Task::Regression => Activation::Identity,
                    Task::Classification => Activation::Softmax,
                };
                Some(LayerParams::he_init(
                    config.latent_dim,
                    mt.head_classes,
                    act,
                    rng,
                )?)
            }
            None => None,
        };
        Ok(Self {
            config,
            encoder: layers,
            decoder,
            head,
            target_scale: None,
        })
    }

    pub fn config(&self) -> &AutoencoderConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    pub fn encoder_layers(&self) -> &[LayerParams] {
        &self.encoder
    }

    pub fn decoder_layers(&self) -> &[LayerParams] {
        &self.decoder
    }

    pub fn head(&self) -> Option<&LayerParams> {
        self.head.as_ref()
    }

    pub fn target_scale(&self) -> Option<TargetScale> {
        self.target_scale
    }

    pub(crate) fn set_target_scale(&mut self, scale: Option<TargetScale>) {
        self.target_scale = scale;
    }

    /// Dimension sequence through encoder then decoder.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.encoder[0].in_dim()];
        dims.extend(
            self.encoder
                .iter()
                .chain(&self.decoder)
                .map(LayerParams::out_dim),
        );
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(LayerParams::param_count).sum()
    }

    fn layers(&self) -> impl Iterator<Item = &LayerParams> {
        self.encoder
            .iter()
            .chain(&self.decoder)
            .chain(self.head.as_ref())
    }

    /// Every parameter buffer: `(W, b)` per layer, encoder, decoder, then head.
    pub fn buffers_mut(&mut self) -> Vec<&mut [f64]> {
        self.encoder
            .iter_mut()
            .chain(self.decoder.iter_mut())
            .chain(self.head.as_mut())
            .flat_map(|l| l.buffers_mut())
            .collect()
    }

    pub fn buffer_sizes(&self) -> Vec<usize> {
        self.layers()
            .flat_map(|l| [l.weights.as_slice().len(), l.biases.len()])
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers()
            .all(|l| l.weights.is_finite() && l.biases.iter().all(|b| b.is_finite()))
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.config.input_dim {
            return Err(Error::shape(
                "autoencoder",
                format!("input {}", x.shape_str()),
                format!("N = {}", self.config.input_dim),
            ));
        }
        Ok(())
    }

    fn blockwise(
        &self,
        x: &Matrix,
        out_cols: usize,
        f: impl Fn(&Matrix) -> Result<Matrix>,
    ) -> Result<Matrix> {
        if x.rows() <= INFERENCE_BLOCK {
            return f(x);
        }
        let mut data = Vec::with_capacity(x.rows() * out_cols);
        let idx: Vec<usize> = (0..x.rows()).collect();
        for block in idx.chunks(INFERENCE_BLOCK) {
            data.extend_from_slice(f(&x.select_rows(block))?.as_slice());
        }
        Matrix::from_vec(x.rows(), out_cols, data)
    }

    /// Latent vectors, `n × M`.
    pub fn encode_matrix(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        self.blockwise(x, self.config.latent_dim, |b| {
            let mut h = b.clone();
            for l in &self.encoder {
                h = l.apply(&h)?;
            }
            Ok(h)
        })
    }

    pub fn encode(&self, ids: &[String], x: &Matrix, source_tag: &str) -> Result<EmbeddingTable> {
        if ids.len() != x.rows() {
            return Err(Error::shape(
                "encode",
                format!("{} ids", ids.len()),
                format!("input {}", x.shape_str()),
            ));
        }
        EmbeddingTable::new(ids.to_vec(), self.encode_matrix(x)?, source_tag)
    }

    /// `decoder(encoder(x))`, `n × N`.
    pub fn reconstruct(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        self.blockwise(x, self.config.input_dim, |b| {
            let mut h = b.clone();
            for l in self.encoder.iter().chain(&self.decoder) {
                h = l.apply(&h)?;
            }
            Ok(h)
        })
    }

    /// Head output: class probabilities (`n × K`) or regression predictions in
    /// original target units (`n × 1`).
    pub fn predict_head(&self, x: &Matrix) -> Result<Matrix> {
        let head = self
            .head
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("model has no multitask head".into()))?;
        let out = head.apply(&self.encode_matrix(x)?)?;
        Ok(match self.target_scale {
            Some(s) if head.activation() == Activation::Identity => out.map(|v| s.invert(v)),
            _ => out,
        })
    }

    fn forward_trace(&self, x: &Matrix) -> Result<ForwardTrace> {
        self.check_input(x)?;
        let mut h = x.clone();
        let mut encoder = Vec::with_capacity(4);
        for l in &self.encoder {
            let (out, cache) = l.forward(&h)?;
            encoder.push(cache);
            h = out;
        }
        let latent = h;
        let mut h = latent.clone();
        let mut decoder = Vec::with_capacity(4);
        for l in &self.decoder {
            let (out, cache) = l.forward(&h)?;
            decoder.push(cache);
            h = out;
        }
        let (head, head_out) = match &self.head {
            Some(l) => {
                let (out, cache) = l.forward(&latent)?;
                (Some(cache), Some(out))
            }
            None => (None, None),
        };
        Ok(ForwardTrace {
            encoder,
            decoder,
            head,
            latent,
            reconstruction: h,
            head_out,
        })
    }

    fn lambda(&self) -> f64 {
        self.config.multitask.as_ref().map_or(0.0, |m| m.lambda)
    }

    /// Joint loss `MAE(x̂, x) + λ·task` only (no gradients).
    pub fn loss(&self, x: &Matrix, target: Option<TaskTarget<'_>>) -> Result<LossParts> {
        let trace = self.forward_trace(x)?;
        Ok(self.loss_terms(&trace, x, target)?.0)
    }

    fn loss_terms(
        &self,
        trace: &ForwardTrace,
        x: &Matrix,
        target: Option<TaskTarget<'_>>,
    ) -> Result<(LossParts, Matrix, Option<Matrix>)> {
        let (reconstruction, d_recon) = mae_loss(&trace.reconstruction, x)?;
        let (task, d_head) = match (&self.head, target) {
            (Some(head), Some(target)) => {
                if target.len() != x.rows() {
                    return Err(Error::shape(
                        "multitask loss",
                        format!("{} targets", target.len()),
                        x.shape_str(),
                    ));
                }
                let cache = trace.head.as_ref().expect("head cache");
                match target {
                    TaskTarget::Regression(y) => {
                        if head.activation() != Activation::Identity {
                            return Err(Error::InvalidArgument(
                                "regression target for a classification head".into(),
                            ));
                        }
                        let (v, g) = mae_loss(
                            trace.head_out.as_ref().expect("head output"),
                            &Matrix::column(y),
                        )?;
                        (v, Some(g))
                    }
                    TaskTarget::Classes(y) => {
                        if head.activation() != Activation::Softmax {
                            return Err(Error::InvalidArgument(
                                "class labels for a regression head".into(),
                            ));
                        }
                        let (v, g) = softmax_crossentropy(&cache.pre_activation, y)?;
                        (v, Some(g))
                    }
                }
            }
            (Some(_), None) => {
                return Err(Error::InvalidArgument(
                    "multitask model needs a target".into(),
                ))
            }
            (None, _) => (0.0, None),
        };
        let lambda = self.lambda();
        let total = if d_head.is_some() {
            reconstruction + lambda * task
        } else {
            reconstruction
        };
        Ok((
            LossParts {
                total,
                reconstruction,
                task,
            },
            d_recon,
            d_head,
        ))
    }

    /// Joint loss and its gradient for every parameter buffer.
    pub fn loss_and_gradients(
        &self,
        x: &Matrix,
        target: Option<TaskTarget<'_>>,
    ) -> Result<(LossParts, Gradients)> {
        let trace = self.forward_trace(x)?;
        let (parts, d_recon, d_head) = self.loss_terms(&trace, x, target)?;

        let mut decoder_grads = Vec::with_capacity(4);
        let mut upstream = d_recon;
        for (l, cache) in self.decoder.iter().zip(&trace.decoder).rev() {
            let g = l.backward(cache, &upstream)?;
            upstream = g.input;
            decoder_grads.push((g.weights, g.biases));
        }
        decoder_grads.reverse();

        let lambda = self.lambda();
        let mut head_grads = None;
        if let (Some(head), Some(d_head)) = (&self.head, d_head) {
            let cache = trace.head.as_ref().expect("head cache");
            let g = if lambda == 0.0 {
                // λ = 0 must reproduce plain training exactly, so nothing is added
                None
            } else {
                let dz = d_head.map(|v| lambda * v);
                Some(match head.activation() {
                    Activation::Softmax => head.backward_pre_activation(cache, &dz)?,
                    _ => head.backward(cache, &dz)?,
                })
            };
            match g {
                Some(g) => {
                    for (u, h) in upstream.as_mut_slice().iter_mut().zip(g.input.as_slice()) {
                        *u += h;
                    }
                    head_grads = Some((g.weights.into_vec(), g.biases));
                }
                None => {
                    head_grads = Some((
                        vec![0.0; head.weights.as_slice().len()],
                        vec![0.0; head.biases.len()],
                    ))
                }
            }
        }
        debug_assert_eq!(upstream.shape(), trace.latent.shape());

        let mut encoder_grads = Vec::with_capacity(4);
        for (l, cache) in self.encoder.iter().zip(&trace.encoder).rev() {
            let g = l.backward(cache, &upstream)?;
            upstream = g.input;
            encoder_grads.push((g.weights, g.biases));
        }
        encoder_grads.reverse();

        let mut out = Vec::with_capacity(18);
        for (w, b) in encoder_grads.into_iter().chain(decoder_grads) {
            out.push(w.into_vec());
            out.push(b);
        }
        if let Some((w, b)) = head_grads {
            out.push(w);
            out.push(b);
        }
        Ok((parts, Gradients(out)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mnist_sized_dims() {
        let m = AutoencoderModel::build(AutoencoderConfig::new(784, 32), &mut Rng::new(0)).unwrap();
        assert_eq!(m.layer_dims(), vec![784, 128, 64, 40, 32, 40, 64, 128, 784]);
        assert_eq!(m.encoder_layers().len(), 4);
        assert_eq!(m.decoder_layers().len(), 4);
    }

    #[test]
    fn first_layer_parameter_count() {
        let m = AutoencoderModel::build(AutoencoderConfig::new(12, 8), &mut Rng::new(0)).unwrap();
        assert_eq!(m.encoder_layers()[0].param_count(), 1664);
    }

    #[test]
    fn activations() {
        let m = AutoencoderModel::build(
            AutoencoderConfig::new(12, 8).with_multitask(Task::Classification, 3, 1.0),
            &mut Rng::new(0),
        )
        .unwrap();
        let acts: Vec<Activation> = m
            .encoder_layers()
            .iter()
            .chain(m.decoder_layers())
            .map(|l| l.activation())
            .collect();
        use Activation::*;
        assert_eq!(
            acts,
            vec![Relu, Relu, Relu, Identity, Relu, Relu, Relu, Identity]
        );
        let clamped = AutoencoderModel::build(
            AutoencoderConfig::new(12, 8).with_output_activation(Relu),
            &mut Rng::new(0),
        )
        .unwrap();
        assert_eq!(clamped.decoder_layers()[3].activation(), Relu);
        let bad = AutoencoderConfig::new(12, 8).with_output_activation(Softmax);
        assert!(AutoencoderModel::build(bad, &mut Rng::new(0)).is_err());
        assert_eq!(m.head().unwrap().activation(), Softmax);
    }

    #[test]
    fn same_seed_same_weights_with_or_without_head() {
        let a = AutoencoderModel::build(AutoencoderConfig::new(20, 4), &mut Rng::new(7)).unwrap();
        let b = AutoencoderModel::build(
            AutoencoderConfig::new(20, 4).with_multitask(Task::Regression, 1, 1.0),
            &mut Rng::new(7),
        )
        .unwrap();
        assert_eq!(a.encoder_layers(), b.encoder_layers());
        assert_eq!(a.decoder_layers(), b.decoder_layers());
        let c = AutoencoderModel::build(AutoencoderConfig::new(20, 4), &mut Rng::new(7)).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn invalid_configs() {
        assert!(AutoencoderModel::build(AutoencoderConfig::new(0, 4), &mut Rng::new(0)).is_err());
        let neg = AutoencoderConfig::new(4, 2).with_multitask(Task::Regression, 1, -1.0);
        assert!(AutoencoderModel::build(neg, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn encode_and_reconstruct_shapes() {
        let m = AutoencoderModel::build(AutoencoderConfig::new(784, 32), &mut Rng::new(1)).unwrap();
        let x = Matrix::from_vec(
            100,
            784,
            (0..78400).map(|i| (i % 255) as f64 / 255.0).collect(),
        )
        .unwrap();
        let z = m.encode_matrix(&x).unwrap();
        assert_eq!(z.shape(), (100, 32));
        assert_eq!(m.encode_matrix(&x).unwrap(), z);
        assert!(m.encode_matrix(&Matrix::zeros(3, 783)).is_err());

        let small =
            AutoencoderModel::build(AutoencoderConfig::new(12, 8), &mut Rng::new(1)).unwrap();
        let r = small.reconstruct(&Matrix::zeros(50, 12)).unwrap();
        assert_eq!(r.shape(), (50, 12));
        assert!(r.is_finite());
    }

    #[test]
    fn identical_rows_identical_embeddings() {
        let m = AutoencoderModel::build(AutoencoderConfig::new(10, 3), &mut Rng::new(2)).unwrap();
        let row: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        let x = Matrix::from_rows(&[row.clone(), vec![0.5; 10], row]).unwrap();
        let z = m.encode_matrix(&x).unwrap();
        assert_eq!(z.row(0), z.row(2));
    }

    #[test]
    fn blockwise_encoding_matches_single_pass() {
        let m = AutoencoderModel::build(AutoencoderConfig::new(5, 2), &mut Rng::new(3)).unwrap();
        let mut rng = Rng::new(4);
        let n = INFERENCE_BLOCK + 17;
        let x = Matrix::from_vec(n, 5, (0..n * 5).map(|_| rng.next_f64()).collect()).unwrap();
        let z = m.encode_matrix(&x).unwrap();
        let tail: Vec<usize> = (INFERENCE_BLOCK..n).collect();
        assert_eq!(
            m.encode_matrix(&x.select_rows(&tail)).unwrap().as_slice(),
            &z.as_slice()[INFERENCE_BLOCK * 2..]
        );
    }

    #[test]
    fn classification_head_rows_sum_to_one() {
        let m = AutoencoderModel::build(
            AutoencoderConfig::new(20, 32).with_multitask(Task::Classification, 10, 1.0),
            &mut Rng::new(5),
        )
        .unwrap();
        let mut rng = Rng::new(6);
        let x = Matrix::from_vec(15, 20, (0..300).map(|_| rng.next_f64()).collect()).unwrap();
        let p = m.predict_head(&x).unwrap();
        assert_eq!(p.shape(), (15, 10));
        for row in p.iter_rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn multitask_needs_target() {
        let m = AutoencoderModel::build(
            AutoencoderConfig::new(4, 2).with_multitask(Task::Regression, 1, 1.0),
            &mut Rng::new(5),
        )
        .unwrap();
        assert!(m.loss_and_gradients(&Matrix::zeros(3, 4), None).is_err());
    }
}
