//! Ensemble training and evaluation over an epoch set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::EpochSet;
use crate::ensemble::{EnsembleBundle, N_MEMBERS};
use crate::error::{Error, Result};
use crate::metrics::{confusion, prf1, roc_auc, ConfusionMatrix, Prf1};
use crate::nn::{train_with, Architecture, EpochStats, SpsqModel, TrainConfig};
use crate::sampling::{
    balance_subsets, split_validation, Split, SubsetManifest, DEFAULT_VALIDATION_FRACTION,
};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_members: usize,
    /// Seeds the non-P300 shuffle and the validation splits.
    pub subset_seed: u64,
    pub validation_fraction: f64,
    /// Probability at or above which a validation epoch counts as P300.
    pub threshold: f64,
    /// Reject pools that do not split evenly.
    pub strict_balance: bool,
    /// Train members concurrently.
    pub parallel: bool,
    /// Member `k` uses `train.seed + k` for initialization and shuffling.
    pub train: TrainConfig,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            n_members: N_MEMBERS,
            subset_seed: 0,
            validation_fraction: DEFAULT_VALIDATION_FRACTION,
            threshold: 0.5,
            strict_balance: false,
            parallel: true,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberReport {
    pub subset_index: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_validation: usize,
    pub validation: ConfusionMatrix,
    pub history: Vec<EpochStats>,
}

#[derive(Debug, Clone)]
pub struct TrainedEnsemble<T: Scalar> {
    pub bundle: EnsembleBundle<T>,
    pub members: Vec<MemberReport>,
    pub subsets: SubsetManifest,
}

/// Network dimensions matching an epoch set.
pub fn architecture_for(set: &EpochSet) -> Architecture {
    Architecture {
        n_times: set.n_times,
        n_channels: set.n_channels,
        ..Architecture::default()
    }
}

/// Splits the training epochs into balanced subsets, trains one network per
/// subset and weights the members by their validation true predictions.
pub fn train_ensemble<T: Scalar>(
    set: &EpochSet,
    config: &EnsembleConfig,
    on_epoch: impl Fn(usize, &EpochStats) + Sync,
) -> Result<TrainedEnsemble<T>> {
    if !set.labeled {
        return Err(Error::MissingLabels);
    }
    if !(0.0..=1.0).contains(&config.threshold) {
        return Err(Error::domain(format!(
            "threshold {} outside [0, 1]",
            config.threshold
        )));
    }
    config.train.validate()?;
    let arch = architecture_for(set);
    arch.validate()?;
    let labels = set.labels();
    let subsets = balance_subsets(
        &labels,
        config.n_members,
        config.subset_seed,
        config.strict_balance,
    )?;
    let splits: Vec<Split> = subsets
        .iter()
        .map(|s| {
            split_validation(
                s,
                config.validation_fraction,
                config.subset_seed.wrapping_add(1 + s.subset_index as u64),
            )
        })
        .collect::<Result<_>>()?;

    let train_member = |k: usize| -> Result<(SpsqModel<T>, MemberReport)> {
        let split = &splits[k];
        let seed = config.train.seed.wrapping_add(k as u64);
        let train_cfg = TrainConfig {
            seed,
            ..config.train.clone()
        };
        let model = SpsqModel::<T>::new(arch, train_cfg, seed)?;
        let inputs: Vec<&[f32]> = split
            .train
            .iter()
            .map(|&(i, _)| set.epochs[i].samples.as_slice())
            .collect();
        let y: Vec<bool> = split.train.iter().map(|m| m.1).collect();
        let trained = train_with(model, &inputs, &y, |s| on_epoch(k, s))?;

        let v_inputs: Vec<&[f32]> = split
            .validation
            .iter()
            .map(|&(i, _)| set.epochs[i].samples.as_slice())
            .collect();
        let v_labels: Vec<bool> = split.validation.iter().map(|m| m.1).collect();
        let probs = trained.model.predict(&v_inputs)?;
        let validation = confusion(&v_labels, &probs, config.threshold)?;
        Ok((
            trained.model,
            MemberReport {
                subset_index: k,
                seed,
                n_train: inputs.len(),
                n_validation: v_inputs.len(),
                validation,
                history: trained.history,
            },
        ))
    };
    let results: Vec<(SpsqModel<T>, MemberReport)> = if config.parallel {
        (0..subsets.len())
            .into_par_iter()
            .map(train_member)
            .collect::<Result<_>>()?
    } else {
        (0..subsets.len())
            .map(train_member)
            .collect::<Result<_>>()?
    };

    let (models, members): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let bundle = EnsembleBundle::new(
        models,
        members.iter().map(|m| m.validation).collect(),
        members.iter().map(|m| m.seed).collect(),
    )?;
    Ok(TrainedEnsemble {
        bundle,
        members,
        subsets: SubsetManifest::new(config.subset_seed, &subsets, &splits),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationRow {
    pub name: String,
    pub confusion: ConfusionMatrix,
    pub metrics: Prf1,
    /// Absent when the evaluated set holds a single class.
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub threshold: f64,
    pub n_epochs: usize,
    pub rows: Vec<ClassificationRow>,
}

impl ClassificationReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,tp,tn,fn,fp,precision,recall,accuracy,f1,auc\n");
        for r in &self.rows {
            let c = &r.confusion;
            let m = &r.metrics;
            let auc = r.auc.map(|a| a.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{auc}\n",
                r.name, c.tp, c.tn, c.fn_, c.fp, m.precision, m.recall, m.accuracy, m.f1
            ));
        }
        out
    }
}

fn row(name: String, labels: &[bool], scores: &[f64], threshold: f64) -> Result<ClassificationRow> {
    let confusion = confusion(labels, scores, threshold)?;
    let auc = match roc_auc(labels, scores) {
        Ok(r) => Some(r.auc),
        Err(Error::Domain(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(ClassificationRow {
        name,
        metrics: prf1(&confusion),
        confusion,
        auc,
    })
}

/// Per-member and ensemble classification of every epoch in `set`.
pub fn evaluate_bundle<T: Scalar>(
    bundle: &EnsembleBundle<T>,
    set: &EpochSet,
    threshold: f64,
) -> Result<ClassificationReport> {
    if !set.labeled {
        return Err(Error::MissingLabels);
    }
    let labels = set.labels();
    let inputs = set.inputs();
    let members = bundle.member_probabilities(&inputs)?;
    let mut rows = Vec::with_capacity(members.len() + 1);
    for (k, probs) in members.iter().enumerate() {
        rows.push(row(format!("member_{}", k + 1), &labels, probs, threshold)?);
    }
    let ensemble: Vec<f64> = (0..inputs.len())
        .map(|i| {
            let p: Vec<f64> = members.iter().map(|m| m[i]).collect();
            crate::ensemble::weighted_score(bundle.weights(), &p)
        })
        .collect();
    rows.push(row("ensemble".into(), &labels, &ensemble, threshold)?);
    Ok(ClassificationReport {
        threshold,
        n_epochs: inputs.len(),
        rows,
    })
}
