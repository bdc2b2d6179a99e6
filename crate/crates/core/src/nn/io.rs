//! Weight files: `"SPSQ"`, format version, JSON header, then little-endian f32
//! blocks in layer order. Batch-norm layers store scale, shift, running mean and
//! running variance.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::dataformat::{decode_raster, read_container, write_container};
use crate::error::{Error, Result};
use crate::nn::arch::{count_parameters, Architecture, Tensor};
use crate::nn::config::TrainConfig;
use crate::nn::model::{Mode, SpsqModel};
use crate::scalar::Scalar;

pub const WEIGHTS_MAGIC: [u8; 4] = *b"SPSQ";
pub const WEIGHTS_VERSION: u8 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct WeightsHeader {
    architecture: Architecture,
    config: TrainConfig,
    n_values: usize,
    blocks: Vec<(String, Vec<usize>)>,
}

enum Block {
    Param(Tensor),
    Bn1Mean,
    Bn1Var,
    Bn2Mean,
    Bn2Var,
}

fn blocks() -> Vec<Block> {
    use Block::*;
    use Tensor as T;
    vec![
        Param(T::Bn1Gamma),
        Param(T::Bn1Beta),
        Bn1Mean,
        Bn1Var,
        Param(T::Conv2dKernel),
        Param(T::Conv2dBias),
        Param(T::Conv1dKernel),
        Param(T::Conv1dBias),
        Param(T::Bn2Gamma),
        Param(T::Bn2Beta),
        Bn2Mean,
        Bn2Var,
        Param(T::Fc1Kernel),
        Param(T::Fc1Bias),
        Param(T::Fc2Kernel),
        Param(T::Fc2Bias),
        Param(T::OutKernel),
        Param(T::OutBias),
    ]
}

fn block_meta(b: &Block, a: &Architecture) -> (String, Vec<usize>) {
    match b {
        Block::Param(t) => (t.name().to_string(), t.shape(a)),
        Block::Bn1Mean => ("batch_norm_1/moving_mean".into(), vec![a.n_channels]),
        Block::Bn1Var => ("batch_norm_1/moving_variance".into(), vec![a.n_channels]),
        Block::Bn2Mean => ("batch_norm_2/moving_mean".into(), vec![a.temporal_filters]),
        Block::Bn2Var => (
            "batch_norm_2/moving_variance".into(),
            vec![a.temporal_filters],
        ),
    }
}

pub fn save_weights<T: Scalar, W: Write>(model: &SpsqModel<T>, mut w: W) -> Result<u64> {
    let a = *model.arch();
    let mut values: Vec<f32> = Vec::with_capacity(count_parameters(&a).total);
    for b in blocks() {
        let src: &[T] = match b {
            Block::Param(t) => model.tensor(t),
            Block::Bn1Mean => &model.bn1_stats().mean,
            Block::Bn1Var => &model.bn1_stats().var,
            Block::Bn2Mean => &model.bn2_stats().mean,
            Block::Bn2Var => &model.bn2_stats().var,
        };
        values.extend(src.iter().map(|v| v.as_f32()));
    }
    let header = WeightsHeader {
        architecture: a,
        config: model.config().clone(),
        n_values: values.len(),
        blocks: blocks().iter().map(|b| block_meta(b, &a)).collect(),
    };
    let json = serde_json::to_vec(&header).map_err(Error::header)?;
    write_container(&mut w, &WEIGHTS_MAGIC, WEIGHTS_VERSION, &json, &values)
}

/// Reads a weight file into an inference-mode model.
pub fn load_weights<T: Scalar, R: Read>(r: R) -> Result<SpsqModel<T>> {
    let (json, payload) = read_container(r, &WEIGHTS_MAGIC, WEIGHTS_VERSION)?;
    let header: WeightsHeader = serde_json::from_slice(&json).map_err(Error::header)?;
    let a = header.architecture;
    a.validate()?;
    let expected: Vec<(String, Vec<usize>)> = blocks().iter().map(|b| block_meta(b, &a)).collect();
    if header.blocks != expected {
        return Err(Error::Shape(format!(
            "weight blocks {:?} do not match the architecture",
            header.blocks
        )));
    }
    let total: usize = expected
        .iter()
        .map(|(_, s)| s.iter().product::<usize>())
        .sum();
    if header.n_values != total {
        return Err(Error::Shape(format!(
            "header declares {} values, architecture needs {total}",
            header.n_values
        )));
    }
    let values = decode_raster(&payload, total as u64 * 4)?;
    let mut model = SpsqModel::<T>::new(a, header.config, 0)?;
    let mut at = 0;
    for b in blocks() {
        let len = block_meta(&b, &a).1.iter().product::<usize>();
        let src = &values[at..at + len];
        at += len;
        let dst: &mut [T] = match b {
            Block::Param(t) => model.tensor_mut(t),
            Block::Bn1Mean => &mut model.bn1_stats_mut().mean,
            Block::Bn1Var => &mut model.bn1_stats_mut().var,
            Block::Bn2Mean => &mut model.bn2_stats_mut().mean,
            Block::Bn2Var => &mut model.bn2_stats_mut().var,
        };
        for (d, &s) in dst.iter_mut().zip(src) {
            *d = T::of(s as f64);
        }
    }
    model.set_mode(Mode::Inference);
    Ok(model)
}
