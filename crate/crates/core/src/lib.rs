//! Hybrid LSTM → Conv1D → Transformer regressor for monthly fuel-demand
//! forecasting, built on a small reverse-mode autodiff engine.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, CSV ingestion and
//! the command-line driver live in the companion `gasfc` crate.
//!
//! Layout, bottom up:
//!
//! - [`tensor`], [`tape`], [`rng`]: dense tensors, the gradient tape and the
//!   seeded generator everything else is built on.
//! - [`layers`]: LSTM, same-padded Conv1D, max pooling, multi-head
//!   self-attention, the post-norm Transformer block and dense layers.
//! - [`models`]: the hybrid network plus the ANN and OLS baselines.
//! - [`data`]: records, cleaning, scaling, reshaping, splitting and the
//!   synthetic generator.
//! - [`training`]: MSE loss, SGD/Adam and the full-batch training loop.
//! - [`eval`]: metrics, perturbation sensitivity, trend extrapolation,
//!   forecasting and the emissions converter.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod layers;
pub mod models;
pub mod rng;
pub mod tape;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use rng::SeededRng;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
