//! Skip-connection denoising autoencoder for log-Mel speech features, trained
//! with distance-correlation penalties between latent/enhanced features and
//! the clean target.
//!
//! Modules, bottom-up:
//!
//! - [`dcor`]: distance covariance/correlation and the dCor gradient
//! - [`features`]: log-Mel extraction, normalization, context windows, SNR mixing
//! - [`nn`]: dense layers, reverse-mode tape, Xavier init, Adam
//! - [`skdae`]: the model, its three objectives, training, enhancement, checkpoints
//! - [`eval`]: feature-space metrics and dependency tables
//! - [`synthetic`]: seeded toy corpora for smoke runs and tests

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dcor;
pub mod error;
pub mod eval;
pub mod features;
pub mod nn;
pub mod seed;
pub mod skdae;
pub mod synthetic;

pub use error::{Error, Result};
