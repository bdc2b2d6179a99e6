//! EPB1 epoch container: `"EPB1" | version u8 | header_len u32 LE | JSON header | raster`.
//! The raster is `n_epochs × n_times × n_channels` little-endian f32.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::dataformat::{decode_raster, read_container, write_container, SpellerMatrix};
use crate::dsp::{Epoch, EpochCharacter, EpochSet, FilterDesign};
use crate::error::{Error, Result};

pub const EPB_MAGIC: &[u8; 4] = b"EPB1";
pub const EPB_VERSION: u8 = 1;

#[derive(Serialize, Deserialize)]
struct EpochRecord {
    code: u8,
    is_target: bool,
    character: usize,
    repetition: usize,
    sample_index: u64,
}

#[derive(Serialize, Deserialize)]
struct EpbHeader {
    subject_id: String,
    fs_hz: f64,
    n_channels: usize,
    n_times: usize,
    n_epochs: usize,
    matrix: SpellerMatrix,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    unlabeled: bool,
    characters: Vec<EpochCharacter>,
    epochs: Vec<EpochRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    filter: Option<FilterDesign>,
}

pub fn write_epochs<W: Write>(set: &EpochSet, mut sink: W) -> Result<u64> {
    let window = set.n_times * set.n_channels;
    if let Some(bad) = set.epochs.iter().position(|e| e.samples.len() != window) {
        return Err(Error::Dimension(format!(
            "epoch {bad} holds {} values, expected {window}",
            set.epochs[bad].samples.len()
        )));
    }
    let header = EpbHeader {
        subject_id: set.subject_id.clone(),
        fs_hz: set.fs_hz,
        n_channels: set.n_channels,
        n_times: set.n_times,
        n_epochs: set.epochs.len(),
        matrix: set.matrix.clone(),
        unlabeled: !set.labeled,
        characters: set.characters.clone(),
        epochs: set
            .epochs
            .iter()
            .map(|e| EpochRecord {
                code: e.code,
                is_target: e.is_target,
                character: e.character,
                repetition: e.repetition,
                sample_index: e.sample_index,
            })
            .collect(),
        filter: set.filter.clone(),
    };
    let json = serde_json::to_vec(&header).map_err(Error::header)?;
    let raster: Vec<f32> = set
        .epochs
        .iter()
        .flat_map(|e| e.samples.iter().copied())
        .collect();
    let n = write_container(&mut sink, EPB_MAGIC, EPB_VERSION, &json, &raster)?;
    sink.flush()?;
    Ok(n)
}

pub fn read_epochs<R: Read>(source: R) -> Result<EpochSet> {
    let (json, payload) = read_container(source, EPB_MAGIC, EPB_VERSION)?;
    let header: EpbHeader = serde_json::from_slice(&json).map_err(Error::header)?;
    if header.epochs.len() != header.n_epochs {
        return Err(Error::Header(format!(
            "{} epoch records for n_epochs = {}",
            header.epochs.len(),
            header.n_epochs
        )));
    }
    let window = header.n_times * header.n_channels;
    let raster = decode_raster(&payload, (header.n_epochs * window) as u64 * 4)?;
    let epochs = header
        .epochs
        .iter()
        .zip(raster.chunks_exact(window.max(1)))
        .map(|(r, samples)| Epoch {
            samples: samples.to_vec(),
            code: r.code,
            is_target: r.is_target,
            character: r.character,
            repetition: r.repetition,
            sample_index: r.sample_index,
        })
        .collect();
    Ok(EpochSet {
        subject_id: header.subject_id,
        fs_hz: header.fs_hz,
        n_channels: header.n_channels,
        n_times: header.n_times,
        matrix: header.matrix,
        labeled: !header.unlabeled,
        characters: header.characters,
        epochs,
        filter: header.filter,
    })
}
