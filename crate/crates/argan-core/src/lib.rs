//! Attentive recurrent GAN for shadow detection and removal.
//!
//! A self-contained implementation: a small reverse-mode autodiff tensor
//! engine, the convolutional layers and recurrent attention network built on
//! it, adversarial (optionally semi-supervised) training, a synthetic shadow
//! dataset generator, and BER / LAB-RMSE evaluation tooling.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod loss;
pub mod metrics;
pub mod net;
pub mod nn;
pub mod optim;
pub mod rng;
pub mod tensor;
pub mod train;
pub mod threads;
pub mod verify;

pub use error::{ArganError, Result};
