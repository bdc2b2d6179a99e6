use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wespsq::dsp::{
    design_cheby1_bandpass, FilterMode, IirFilter, DEFAULT_DECIMATION_STRIDE, DEFAULT_HIGH_HZ,
    DEFAULT_LOW_HZ, DEFAULT_ORDER, DEFAULT_RIPPLE_DB,
};
use wespsq::pipeline::EnsembleConfig;
use wespsq::speller::DEFAULT_MAX_REPETITIONS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub order: usize,
    pub ripple_db: f64,
    pub low_hz: f64,
    pub high_hz: f64,
    pub mode: FilterMode,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            order: DEFAULT_ORDER,
            ripple_db: DEFAULT_RIPPLE_DB,
            low_hz: DEFAULT_LOW_HZ,
            high_hz: DEFAULT_HIGH_HZ,
            mode: FilterMode::Causal,
        }
    }
}

impl FilterConfig {
    pub fn design(&self, fs_hz: f64) -> wespsq::Result<IirFilter> {
        design_cheby1_bandpass(self.order, self.ripple_db, self.low_hz, self.high_hz, fs_hz)
    }
}

/// Every tunable of the pipeline. Missing keys take their defaults; unknown
/// keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub filter: FilterConfig,
    /// Stride of the optional decimated feature export.
    pub decimation_stride: usize,
    pub ensemble: EnsembleConfig,
    /// Repetitions swept by `spell` and `ablate`.
    pub max_repetitions: usize,
    /// Where reports go unless `--report-dir` is given.
    pub report_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            filter: FilterConfig::default(),
            decimation_stride: DEFAULT_DECIMATION_STRIDE,
            ensemble: EnsembleConfig::default(),
            max_repetitions: DEFAULT_MAX_REPETITIONS,
            report_dir: PathBuf::from("reports"),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// SHA-256 of the canonical JSON serialization, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default() {
        let c: PipelineConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, PipelineConfig::default());
        assert_eq!(c.hash(), PipelineConfig::default().hash());
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"filtre": {}}"#).is_err());
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"filter": {"orde": 2}}"#).is_err());
        assert!(
            serde_json::from_str::<PipelineConfig>(r#"{"ensemble": {"train": {"lr": 1}}}"#)
                .is_err()
        );
    }

    #[test]
    fn hash_tracks_content() {
        let mut c = PipelineConfig::default();
        let h = c.hash();
        c.ensemble.train.seed = 1;
        assert_ne!(c.hash(), h);
        let back: PipelineConfig =
            serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back.hash(), c.hash());
    }
}
