//! P300 speller decoding with a weighted ensemble of spatio-sequential CNNs.
//!
//! The pipeline runs: EEGB session → band-pass filter and epoch extraction →
//! class-balanced subsets → one network per subset → validation-weighted
//! ensemble → score accumulation over repetitions → character decoding.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`). Training uses `f32`;
//! gradient verification uses `f64`.

// `!(x > 0.0)` style guards reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataformat;
pub mod dsp;
pub mod ensemble;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod sampling;
pub mod scalar;
pub mod speller;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type SpsqModel32 = nn::SpsqModel<f32>;
pub type SpsqModel64 = nn::SpsqModel<f64>;
pub type EnsembleBundle32 = ensemble::EnsembleBundle<f32>;
pub type EnsembleBundle64 = ensemble::EnsembleBundle<f64>;
pub type TrainedEnsemble32 = pipeline::TrainedEnsemble<f32>;
