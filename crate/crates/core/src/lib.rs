//! Trainable STFT front-end built from sparse butterfly layers, and a small
//! causal speech-enhancement model on top of it.
//!
//! The forward FFT is stored as `log2 n` sparse factors after a fixed
//! bit-reversal permutation. Every nonzero can be trained, and at
//! initialization the product is the exact DFT.

pub mod audio;
pub mod autodiff;
pub mod butterfly;
pub mod cli;
pub mod config;
pub mod error;
pub mod masknet;
pub mod metrics;
pub mod pipeline;
pub mod training;

pub use error::{Error, Result};
