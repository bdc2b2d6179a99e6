//! Weighted ensemble of independently trained networks.
//!
//! Member `k` gets weight `T_k / Σ T_i`, where `T_k = TP + TN` on its validation
//! split. The ensemble score of an epoch is `Σ_k W_k · p_k`.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::Epoch;
use crate::error::{Error, Result};
use crate::metrics::ConfusionMatrix;
use crate::nn::{load_weights, save_weights, Mode, SpsqModel};
use crate::scalar::Scalar;

pub const N_MEMBERS: usize = 5;

/// Normalized true-prediction counts.
pub fn compute_weights(confusions: &[ConfusionMatrix]) -> Result<Vec<f64>> {
    if confusions.is_empty() {
        return Err(Error::DegenerateWeights);
    }
    let total: u64 = confusions.iter().map(|c| c.true_predictions()).sum();
    if total == 0 {
        return Err(Error::DegenerateWeights);
    }
    Ok(confusions
        .iter()
        .map(|c| c.true_predictions() as f64 / total as f64)
        .collect())
}

/// `Σ_k W_k · p_k`, summed in member order.
pub fn weighted_score(weights: &[f64], probs: &[f64]) -> f64 {
    weights.iter().zip(probs).map(|(w, p)| w * p).sum()
}

/// Anything that assigns a P300 probability to epochs.
pub trait EpochScorer: Sync {
    fn score_epochs(&self, epochs: &[&Epoch]) -> Result<Vec<f64>>;
}

impl<T: Scalar> EpochScorer for SpsqModel<T> {
    fn score_epochs(&self, epochs: &[&Epoch]) -> Result<Vec<f64>> {
        let inputs: Vec<&[f32]> = epochs.iter().map(|e| e.samples.as_slice()).collect();
        self.predict(&inputs)
    }
}

/// Scores 1 on target flashes and 0 elsewhere, read from the labels.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleScorer;

impl EpochScorer for OracleScorer {
    fn score_epochs(&self, epochs: &[&Epoch]) -> Result<Vec<f64>> {
        Ok(epochs
            .iter()
            .map(|e| if e.is_target { 1.0 } else { 0.0 })
            .collect())
    }
}

/// Scores every epoch with the same value.
#[derive(Debug, Clone, Copy)]
pub struct ConstantScorer(pub f64);

impl EpochScorer for ConstantScorer {
    fn score_epochs(&self, epochs: &[&Epoch]) -> Result<Vec<f64>> {
        Ok(vec![self.0; epochs.len()])
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleBundle<T: Scalar> {
    models: Vec<SpsqModel<T>>,
    weights: Vec<f64>,
    confusions: Vec<ConfusionMatrix>,
    seeds: Vec<u64>,
}

impl<T: Scalar> EnsembleBundle<T> {
    /// Freezes the members and derives their weights from validation confusions.
    pub fn new(
        mut models: Vec<SpsqModel<T>>,
        confusions: Vec<ConfusionMatrix>,
        seeds: Vec<u64>,
    ) -> Result<Self> {
        if models.is_empty() || models.len() != confusions.len() || models.len() != seeds.len() {
            return Err(Error::Dimension(format!(
                "{} models, {} confusions, {} seeds",
                models.len(),
                confusions.len(),
                seeds.len()
            )));
        }
        if models.iter().any(|m| m.arch() != models[0].arch()) {
            return Err(Error::Shape(
                "ensemble members have different architectures".into(),
            ));
        }
        let weights = compute_weights(&confusions)?;
        for m in &mut models {
            m.set_mode(Mode::Inference);
        }
        Ok(Self {
            models,
            weights,
            confusions,
            seeds,
        })
    }

    pub fn models(&self) -> &[SpsqModel<T>] {
        &self.models
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn confusions(&self) -> &[ConfusionMatrix] {
        &self.confusions
    }

    pub fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    /// Probabilities of every member, `[member][input]`. Members run in parallel.
    pub fn member_probabilities(&self, inputs: &[&[f32]]) -> Result<Vec<Vec<f64>>> {
        self.models.par_iter().map(|m| m.predict(inputs)).collect()
    }

    pub fn predict(&self, inputs: &[&[f32]]) -> Result<Vec<f64>> {
        let members = self.member_probabilities(inputs)?;
        Ok((0..inputs.len())
            .map(|i| {
                let probs: Vec<f64> = members.iter().map(|m| m[i]).collect();
                weighted_score(&self.weights, &probs)
            })
            .collect())
    }
}

impl<T: Scalar> EpochScorer for EnsembleBundle<T> {
    fn score_epochs(&self, epochs: &[&Epoch]) -> Result<Vec<f64>> {
        let inputs: Vec<&[f32]> = epochs.iter().map(|e| e.samples.as_slice()).collect();
        self.predict(&inputs)
    }
}

pub fn ensemble_predict<T: Scalar>(bundle: &EnsembleBundle<T>, epoch: &Epoch) -> Result<f64> {
    Ok(bundle.predict(&[epoch.samples.as_slice()])?[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberEntry {
    /// Weight file, relative to the manifest's directory.
    pub weights_file: String,
    pub weight: f64,
    pub validation: ConfusionMatrix,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleManifest {
    pub members: Vec<MemberEntry>,
    #[serde(default)]
    pub config_hash: Option<String>,
}

pub const MANIFEST_FILE: &str = "bundle.json";

/// Writes `member_<k>.spsq` files and `bundle.json` into `dir`.
pub fn save_bundle<T: Scalar>(
    bundle: &EnsembleBundle<T>,
    dir: &Path,
    config_hash: Option<String>,
) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut members = Vec::with_capacity(bundle.len());
    for (k, model) in bundle.models.iter().enumerate() {
        let name = format!("member_{k}.spsq");
        save_weights(model, BufWriter::new(File::create(dir.join(&name))?))?;
        members.push(MemberEntry {
            weights_file: name,
            weight: bundle.weights[k],
            validation: bundle.confusions[k],
            seed: bundle.seeds[k],
        });
    }
    let manifest = BundleManifest {
        members,
        config_hash,
    };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).map_err(Error::header)?;
    std::fs::write(&path, json)?;
    Ok(path)
}

/// Loads a bundle from its manifest. Weights are recomputed from the stored
/// confusions and must agree with the recorded ones.
pub fn load_bundle<T: Scalar>(manifest_path: &Path) -> Result<(EnsembleBundle<T>, BundleManifest)> {
    let text = std::fs::read_to_string(manifest_path)?;
    let manifest: BundleManifest = serde_json::from_str(&text).map_err(Error::header)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let mut models = Vec::with_capacity(manifest.members.len());
    for m in &manifest.members {
        let f = File::open(dir.join(&m.weights_file))?;
        models.push(load_weights::<T, _>(BufReader::new(f))?);
    }
    let bundle = EnsembleBundle::new(
        models,
        manifest.members.iter().map(|m| m.validation).collect(),
        manifest.members.iter().map(|m| m.seed).collect(),
    )?;
    for (m, &w) in manifest.members.iter().zip(&bundle.weights) {
        if (m.weight - w).abs() > 1e-12 {
            return Err(Error::Header(format!(
                "manifest weight {} for {} disagrees with its confusion counts ({w})",
                m.weight, m.weights_file
            )));
        }
    }
    Ok((bundle, manifest))
}
