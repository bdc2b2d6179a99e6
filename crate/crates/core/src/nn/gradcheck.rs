//! Finite-difference verification of the analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::nn::arch::Tensor;
use crate::nn::model::{bce_loss, SpsqModel};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub step: f64,
    /// Normalize with batch statistics instead of running statistics.
    pub batch_stats: bool,
    /// Check at most this many entries per tensor, chosen at random; `None` checks all.
    pub per_tensor: Option<usize>,
    pub seed: u64,
    /// Lower bound on the denominator of the relative error, so that entries whose
    /// true gradient is essentially zero are judged by absolute error.
    pub floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            batch_stats: false,
            per_tensor: None,
            seed: 0,
            floor: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensorCheck {
    pub tensor: &'static str,
    pub checked: usize,
    pub max_rel_error: f64,
    pub max_abs_gradient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub tensors: Vec<TensorCheck>,
}

/// Largest relative error over every parameter for a single labeled sample,
/// normalizing with running statistics and without dropout.
pub fn gradient_check(model: &SpsqModel<f64>, sample: &[f64], label: bool) -> Result<f64> {
    Ok(gradient_check_with(model, sample, &[label], &GradCheckOptions::default())?.max_rel_error)
}

pub fn gradient_check_with(
    model: &SpsqModel<f64>,
    inputs: &[f64],
    labels: &[bool],
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    if !(opts.step > 0.0) {
        return Err(Error::domain("finite-difference step must be positive"));
    }
    let n = labels.len();
    let clamp = model.config().prob_clamp;
    let loss_of = |m: &SpsqModel<f64>| -> Result<f64> {
        let c = m.forward_cached(inputs, n, opts.batch_stats, None)?;
        Ok(bce_loss(&c.probs, labels, clamp).0)
    };
    let cache = model.forward_cached(inputs, n, opts.batch_stats, None)?;
    let (_, dlogits) = bce_loss(&cache.probs, labels, clamp);
    let analytic = model.backward(&cache, &dlogits);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut probe = model.clone();
    let mut tensors = Vec::with_capacity(Tensor::ALL.len());
    for t in Tensor::ALL {
        let range = model.layout().range(t);
        let len = range.len();
        let picks: Vec<usize> = match opts.per_tensor {
            Some(k) if k < len => sample(&mut rng, len, k).into_vec(),
            _ => (0..len).collect(),
        };
        let mut worst = 0.0f64;
        let mut biggest = 0.0f64;
        for j in &picks {
            let i = range.start + j;
            let orig = probe.params()[i];
            probe.params_mut()[i] = orig + opts.step;
            let up = loss_of(&probe)?;
            probe.params_mut()[i] = orig - opts.step;
            let down = loss_of(&probe)?;
            probe.params_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * opts.step);
            let a = analytic[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(opts.floor);
            worst = worst.max(rel);
            biggest = biggest.max(a.abs());
        }
        tensors.push(TensorCheck {
            tensor: t.name(),
            checked: picks.len(),
            max_rel_error: worst,
            max_abs_gradient: biggest,
        });
    }
    Ok(GradCheckReport {
        max_rel_error: tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max),
        tensors,
    })
}
