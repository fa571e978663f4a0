//! Dense numeric substrate shared by the autoencoder and the downstream learners.
//!
//! Everything is `f64` and single-threaded so that a fixed seed reproduces a
//! training run bit for bit.

mod adam;
mod layer;
mod loss;
mod matrix;
mod rng;

pub use adam::{AdamConfig, AdamState};
pub use layer::{Activation, LayerCache, LayerGrads, LayerParams};
pub use loss::{mae_loss, softmax_crossentropy, softmax_rows};
pub use matrix::Matrix;
pub use rng::Rng;
