use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataformat::{validate_session, Session, SpellerMatrix, EPOCH_LEN};
use crate::dsp::{filter_in_place, FilterDesign, IirFilter};
use crate::error::{Error, Result};

/// Decimated samples per channel in the flat feature layout.
pub const FEATURE_SAMPLES: usize = 14;
pub const DEFAULT_DECIMATION_STRIDE: usize = 12;

/// One post-stimulus window, time-major (`n_times × n_channels`).
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    pub samples: Vec<f32>,
    pub code: u8,
    pub is_target: bool,
    pub character: usize,
    pub repetition: usize,
    pub sample_index: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochCharacter {
    pub symbol: char,
    pub first_epoch: usize,
    pub n_epochs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochSet {
    pub subject_id: String,
    pub fs_hz: f64,
    pub n_channels: usize,
    pub n_times: usize,
    pub matrix: SpellerMatrix,
    pub labeled: bool,
    pub characters: Vec<EpochCharacter>,
    pub epochs: Vec<Epoch>,
    pub filter: Option<FilterDesign>,
}

impl EpochSet {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn n_targets(&self) -> usize {
        self.epochs.iter().filter(|e| e.is_target).count()
    }

    pub fn character_epochs(&self, character: usize) -> &[Epoch] {
        let c = &self.characters[character];
        &self.epochs[c.first_epoch..c.first_epoch + c.n_epochs]
    }

    pub fn labels(&self) -> Vec<bool> {
        self.epochs.iter().map(|e| e.is_target).collect()
    }

    pub fn inputs(&self) -> Vec<&[f32]> {
        self.epochs.iter().map(|e| e.samples.as_slice()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    #[default]
    Causal,
    ZeroPhase,
}

/// Filters every channel over the whole record, then slices one window per marker.
pub fn extract_epochs(session: &Session, filter: &IirFilter) -> Result<EpochSet> {
    extract_epochs_with(session, filter, FilterMode::Causal)
}

pub fn extract_epochs_with(
    session: &Session,
    filter: &IirFilter,
    mode: FilterMode,
) -> Result<EpochSet> {
    validate_session(session).into_result()?;
    let n_ch = session.n_channels;
    let n_samples = session.n_samples();

    let channels: Vec<Vec<f32>> = (0..n_ch)
        .into_par_iter()
        .map(|c| {
            let mut x: Vec<f64> = (0..n_samples)
                .map(|t| session.data[t * n_ch + c] as f64)
                .collect();
            filter_in_place(filter, &mut x);
            if mode == FilterMode::ZeroPhase {
                x.reverse();
                filter_in_place(filter, &mut x);
                x.reverse();
            }
            x.into_iter().map(|v| v as f32).collect()
        })
        .collect();

    let mut epochs = Vec::with_capacity(session.markers.len());
    let mut characters = Vec::with_capacity(session.characters.len());
    for (ci, span) in session.characters.iter().enumerate() {
        let first_epoch = epochs.len();
        let mut seen = [0usize; 13];
        for m in &session.markers[span.markers()] {
            let start = m.sample_index as usize;
            let mut samples = Vec::with_capacity(EPOCH_LEN * n_ch);
            for t in start..start + EPOCH_LEN {
                samples.extend(channels.iter().map(|ch| ch[t]));
            }
            epochs.push(Epoch {
                samples,
                code: m.code,
                is_target: m.is_target,
                character: ci,
                repetition: seen[m.code as usize],
                sample_index: m.sample_index,
            });
            seen[m.code as usize] += 1;
        }
        characters.push(EpochCharacter {
            symbol: span.symbol,
            first_epoch,
            n_epochs: span.n_markers,
        });
    }
    Ok(EpochSet {
        subject_id: session.subject_id.clone(),
        fs_hz: session.fs_hz,
        n_channels: n_ch,
        n_times: EPOCH_LEN,
        matrix: session.matrix.clone(),
        labeled: session.labeled,
        characters,
        epochs,
        filter: Some(filter.design.clone()),
    })
}

/// Flat decimated feature vector: channel blocks of decimated samples, concatenated.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f32>,
    pub samples_per_channel: usize,
}

impl FeatureVector {
    /// True when the layout is the 14-samples-per-channel one (896 values for 64 channels).
    pub fn is_conforming(&self) -> bool {
        self.samples_per_channel == FEATURE_SAMPLES
    }
}

/// Takes samples 0, stride, 2·stride, … of every channel. In strict mode any stride
/// that does not yield 14 samples per channel is a dimension error.
pub fn decimate_epoch(
    epoch: &Epoch,
    n_channels: usize,
    stride: usize,
    strict: bool,
) -> Result<FeatureVector> {
    if stride == 0 {
        return Err(Error::domain("decimation stride must be positive"));
    }
    if n_channels == 0 || !epoch.samples.len().is_multiple_of(n_channels) {
        return Err(Error::Dimension(format!(
            "epoch of {} values does not split into {n_channels} channels",
            epoch.samples.len()
        )));
    }
    let n_times = epoch.samples.len() / n_channels;
    let per_channel = n_times.div_ceil(stride);
    if strict && per_channel != FEATURE_SAMPLES {
        return Err(Error::Dimension(format!(
            "stride {stride} yields {per_channel} samples per channel, expected {FEATURE_SAMPLES}"
        )));
    }
    let mut values = Vec::with_capacity(per_channel * n_channels);
    for c in 0..n_channels {
        values.extend(
            (0..n_times)
                .step_by(stride)
                .map(|t| epoch.samples[t * n_channels + c]),
        );
    }
    Ok(FeatureVector {
        values,
        samples_per_channel: per_channel,
    })
}

/// Element-wise mean of epochs sharing one stimulus code.
pub fn average_epochs(epochs: &[&Epoch]) -> Result<Epoch> {
    let first = *epochs
        .first()
        .ok_or_else(|| Error::domain("cannot average zero epochs"))?;
    for e in epochs {
        if e.code != first.code {
            return Err(Error::domain(format!(
                "mixed stimulus codes {} and {}",
                first.code, e.code
            )));
        }
        if e.is_target != first.is_target {
            return Err(Error::domain("mixed target labels"));
        }
        if e.samples.len() != first.samples.len() {
            return Err(Error::Dimension("epochs differ in size".into()));
        }
    }
    let n = epochs.len() as f64;
    let samples = (0..first.samples.len())
        .map(|i| (epochs.iter().map(|e| e.samples[i] as f64).sum::<f64>() / n) as f32)
        .collect();
    Ok(Epoch {
        samples,
        ..first.clone()
    })
}
