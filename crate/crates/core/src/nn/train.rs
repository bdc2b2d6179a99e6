use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::adam::AdamState;
use crate::nn::model::{bce_loss, Mode, SpsqModel};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean training loss over the epoch's batches, weighted by batch size.
    pub loss: f64,
    /// Training accuracy at threshold 0.5, measured with dropout active.
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub loss: f64,
    pub correct: usize,
}

/// One optimizer step on a flat batch: batch-statistics forward pass with
/// dropout, loss, backward pass, running-statistics update and Adam update.
/// A non-finite loss or gradient aborts before any state changes.
pub fn train_step<T: Scalar>(
    model: &mut SpsqModel<T>,
    opt: &mut AdamState<T>,
    batch: &[T],
    labels: &[bool],
    dropout_seed: u64,
) -> Result<StepOutcome> {
    if model.mode() != Mode::Training {
        return Err(Error::domain("train_step needs a model in training mode"));
    }
    let per = model.arch().input_len();
    if labels.is_empty() || batch.len() != labels.len() * per {
        return Err(Error::Dimension(format!(
            "{} labels for a batch of {} values",
            labels.len(),
            batch.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed);
    let cache = model.forward_cached(batch, labels.len(), true, Some(&mut rng))?;
    let (loss, dlogits) = bce_loss(&cache.probs, labels, model.config().prob_clamp);
    let loss = loss.as_f64();
    let grads = model.backward(&cache, &dlogits);
    if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::Divergence {
            epoch: 0,
            batch_index: opt.step as usize,
            loss,
            history: Vec::new(),
        });
    }
    let correct = cache
        .probs
        .iter()
        .zip(labels)
        .filter(|(p, &y)| (p.as_f64() >= 0.5) == y)
        .count();
    model.update_running_stats(&cache);
    opt.update(model.params_mut(), &grads);
    Ok(StepOutcome { loss, correct })
}

#[derive(Debug, Clone)]
pub struct Trained<T: Scalar> {
    /// Left in inference mode.
    pub model: SpsqModel<T>,
    pub history: Vec<EpochStats>,
    pub optimizer: AdamState<T>,
}

pub fn train<T: Scalar>(
    model: SpsqModel<T>,
    inputs: &[&[f32]],
    labels: &[bool],
) -> Result<Trained<T>> {
    train_with(model, inputs, labels, |_| {})
}

/// Mini-batch training for the configured number of epochs. Samples are
/// reshuffled every epoch from the configured seed; the final partial batch is
/// kept.
pub fn train_with<T: Scalar>(
    mut model: SpsqModel<T>,
    inputs: &[&[f32]],
    labels: &[bool],
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<Trained<T>> {
    if inputs.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} inputs but {} labels",
            inputs.len(),
            labels.len()
        )));
    }
    if inputs.is_empty() {
        return Err(Error::domain("no training samples"));
    }
    let per = model.arch().input_len();
    if let Some(x) = inputs.iter().find(|x| x.len() != per) {
        return Err(Error::Dimension(format!(
            "input of {} values, expected {per}",
            x.len()
        )));
    }
    let config = model.config().clone();
    let mut opt = AdamState::new(model.params().len(), &config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut batch: Vec<T> = Vec::with_capacity(config.batch_size * per);
    let mut batch_labels = Vec::with_capacity(config.batch_size);
    model.set_mode(Mode::Training);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for idx in order.chunks(config.batch_size) {
            batch.clear();
            batch_labels.clear();
            for &i in idx {
                batch.extend(inputs[i].iter().map(|&v| T::of(v as f64)));
                batch_labels.push(labels[i]);
            }
            let step = train_step(&mut model, &mut opt, &batch, &batch_labels, rng.random())
                .map_err(|e| match e {
                    Error::Divergence {
                        batch_index, loss, ..
                    } => Error::Divergence {
                        epoch,
                        batch_index,
                        loss,
                        history: history.clone(),
                    },
                    other => other,
                })?;
            loss_sum += step.loss * idx.len() as f64;
            correct += step.correct;
        }
        let stats = EpochStats {
            epoch,
            loss: loss_sum / inputs.len() as f64,
            accuracy: correct as f64 / inputs.len() as f64,
        };
        on_epoch(&stats);
        history.push(stats);
    }
    model.set_mode(Mode::Inference);
    Ok(Trained {
        model,
        history,
        optimizer: opt,
    })
}
