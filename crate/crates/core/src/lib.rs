//! Privacy-preserving collaborative learning through autoencoder embeddings.
//!
//! Two peers that hold different feature columns for the same observations
//! each compress their slice with an autoencoder, exchange only the latent
//! vectors, join them by observation ID and train a shared downstream model.
//!
//! The crate is organised bottom-up:
//!
//! - [`numeric`]: dense matrices, dense layers, losses, He initialisation and Adam.
//! - [`data`]: CSV ingestion, min-max scaling, row and column splits, embedding joins.
//! - [`autoencoder`]: the fixed `N→128→64→40→M` encoder, its mirrored decoder and
//!   the optional multitask head.
//! - [`downstream`]: ridge regression, multinomial logistic regression and
//!   randomized-search cross validation.
//! - [`metrics`]: R², MAPE, accuracy/precision/recall and reconstruction diagnostics.
//! - [`scenario`]: manifest-driven end-to-end runs of scenarios 0–4 and report emission.
//! - [`exchange`]: the `LSE1` embedding file format and the framed peer-to-peer transfer.
//! - [`gradcheck`]: finite-difference verification of the backward passes.

pub mod autoencoder;
pub mod data;
pub mod downstream;
mod error;
pub mod exchange;
pub mod gradcheck;
pub mod metrics;
pub mod numeric;
pub mod scenario;

pub use error::{Error, Result};
