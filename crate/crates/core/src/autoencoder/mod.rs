//! The fixed dense autoencoder `N→128→64→40→M→40→64→128→N` and its
//! multitask variant, which adds a prediction head on the latent layer.

mod checkpoint;
mod model;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use model::{
    AutoencoderConfig, AutoencoderModel, Gradients, LossParts, MultitaskConfig, TargetScale,
    TaskTarget, DEFAULT_ENCODER_HIDDEN, DEFAULT_LATENT_DIM,
};
pub use train::{train, train_multitask, TrainConfig, TrainHistory};
