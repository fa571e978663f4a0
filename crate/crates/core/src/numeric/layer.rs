use serde::{Deserialize, Serialize};

use super::{softmax_rows, Matrix, Rng};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
    Softmax,
}

/// Dense layer `activation(x·W + b)` with `W` stored `in_dim × out_dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weights: Matrix,
    pub biases: Vec<f64>,
    activation: Activation,
}

/// What a forward pass keeps for the matching backward pass.
#[derive(Clone, Debug)]
pub struct LayerCache {
    pub input: Matrix,
    pub pre_activation: Matrix,
    output: Option<Matrix>,
}

#[derive(Clone, Debug)]
pub struct LayerGrads {
    pub input: Matrix,
    pub weights: Matrix,
    pub biases: Vec<f64>,
}

impl LayerParams {
    pub fn new(weights: Matrix, biases: Vec<f64>, activation: Activation) -> Result<Self> {
        if weights.cols() != biases.len() {
            return Err(Error::shape(
                "LayerParams::new",
                format!("weights {}", weights.shape_str()),
                format!("{} biases", biases.len()),
            ));
        }
        if weights.rows() == 0 || weights.cols() == 0 {
            return Err(Error::InvalidArgument(
                "layer dimensions must be >= 1".into(),
            ));
        }
        Ok(Self {
            weights,
            biases,
            activation,
        })
    }

    /// He initialisation: weights ~ N(0, 2/in_dim), zero biases.
    pub fn he_init(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut Rng,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidArgument(format!(
                "layer dimensions must be >= 1, got {in_dim}->{out_dim}"
            )));
        }
        let std = (2.0 / in_dim as f64).sqrt();
        let data = (0..in_dim * out_dim).map(|_| std * rng.normal()).collect();
        Self::new(
            Matrix::from_vec(in_dim, out_dim, data)?,
            vec![0.0; out_dim],
            activation,
        )
    }

    pub fn in_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn param_count(&self) -> usize {
        self.weights.as_slice().len() + self.biases.len()
    }

    fn affine(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.in_dim() {
            return Err(Error::shape(
                "layer_forward",
                format!("input {}", x.shape_str()),
                format!("layer {}->{}", self.in_dim(), self.out_dim()),
            ));
        }
        let mut z = x.matmul(&self.weights)?;
        let n = self.out_dim();
        for row in z.as_mut_slice().chunks_exact_mut(n) {
            for (v, b) in row.iter_mut().zip(&self.biases) {
                *v += b;
            }
        }
        Ok(z)
    }

    fn activate(&self, z: &Matrix) -> Matrix {
        match self.activation {
            Activation::Relu => z.map(|v| if v > 0.0 { v } else { 0.0 }),
            Activation::Identity => z.clone(),
            Activation::Softmax => softmax_rows(z),
        }
    }

    /// Forward pass without keeping a cache.
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        let z = self.affine(x)?;
        Ok(match self.activation {
            Activation::Identity => z,
            _ => self.activate(&z),
        })
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, LayerCache)> {
        let z = self.affine(x)?;
        let out = self.activate(&z);
        let output = (self.activation == Activation::Softmax).then(|| out.clone());
        Ok((
            out,
            LayerCache {
                input: x.clone(),
                pre_activation: z,
                output,
            },
        ))
    }

    /// Gradients of the layer output w.r.t. input, weights and biases, chained
    /// with `upstream` (the gradient w.r.t. this layer's output).
    pub fn backward(&self, cache: &LayerCache, upstream: &Matrix) -> Result<LayerGrads> {
        if upstream.shape() != cache.pre_activation.shape() {
            return Err(Error::shape(
                "layer_backward",
                format!("upstream {}", upstream.shape_str()),
                format!("output {}", cache.pre_activation.shape_str()),
            ));
        }
        let dz = match self.activation {
            Activation::Identity => upstream.clone(),
            Activation::Relu => {
                let mut dz = upstream.clone();
                // subgradient 0 at exactly 0
                for (g, &z) in dz
                    .as_mut_slice()
                    .iter_mut()
                    .zip(cache.pre_activation.as_slice())
                {
                    if z <= 0.0 {
                        *g = 0.0;
                    }
                }
                dz
            }
            Activation::Softmax => {
                let s = cache
                    .output
                    .as_ref()
                    .expect("softmax cache keeps its output");
                let mut dz = upstream.clone();
                let k = s.cols();
                for r in 0..s.rows() {
                    let srow = s.row(r);
                    let dot: f64 = srow.iter().zip(upstream.row(r)).map(|(a, b)| a * b).sum();
                    let drow = &mut dz.as_mut_slice()[r * k..(r + 1) * k];
                    for (d, &sv) in drow.iter_mut().zip(srow) {
                        *d = sv * (*d - dot);
                    }
                }
                dz
            }
        };
        self.backward_pre_activation(cache, &dz)
    }

    /// Backward pass starting from the gradient w.r.t. the pre-activation
    /// `x·W + b`, e.g. the fused softmax–cross-entropy gradient.
    pub fn backward_pre_activation(&self, cache: &LayerCache, dz: &Matrix) -> Result<LayerGrads> {
        if dz.shape() != cache.pre_activation.shape() {
            return Err(Error::shape(
                "layer_backward",
                format!("gradient {}", dz.shape_str()),
                format!("pre-activation {}", cache.pre_activation.shape_str()),
            ));
        }
        Ok(LayerGrads {
            input: dz.matmul_t(&self.weights)?,
            weights: cache.input.t_matmul(dz)?,
            biases: dz.col_sums(),
        })
    }

    pub(crate) fn buffers_mut(&mut self) -> [&mut [f64]; 2] {
        [self.weights.as_mut_slice(), self.biases.as_mut_slice()]
    }
}
