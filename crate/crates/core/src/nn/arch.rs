use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Layer dimensions. The default reproduces the reference stack:
/// BN(64) → Conv2D 1×64×32 → Conv1D 20/20 ×16 → BN(16) → LeakyReLU → 128 → 128 → 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub n_times: usize,
    pub n_channels: usize,
    pub spatial_filters: usize,
    /// Kernel length of the temporal convolution; also its stride.
    pub temporal_kernel: usize,
    pub temporal_filters: usize,
    pub hidden: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            n_times: 160,
            n_channels: 64,
            spatial_filters: 32,
            temporal_kernel: 20,
            temporal_filters: 16,
            hidden: 128,
        }
    }
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.n_times,
            self.n_channels,
            self.spatial_filters,
            self.temporal_kernel,
            self.temporal_filters,
            self.hidden,
        ];
        if dims.contains(&0) {
            return Err(Error::Shape(format!("zero-sized dimension in {self:?}")));
        }
        if !self.n_times.is_multiple_of(self.temporal_kernel) {
            return Err(Error::Shape(format!(
                "{} time samples do not tile into non-overlapping windows of {}",
                self.n_times, self.temporal_kernel
            )));
        }
        Ok(())
    }

    /// Output steps of the strided temporal convolution.
    pub fn temporal_steps(&self) -> usize {
        self.n_times / self.temporal_kernel
    }

    pub fn flat_len(&self) -> usize {
        self.temporal_steps() * self.temporal_filters
    }

    pub fn input_len(&self) -> usize {
        self.n_times * self.n_channels
    }

    /// Per-sample output shape of every listed layer, in order.
    pub fn output_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        let l = self.temporal_steps();
        vec![
            ("batch_norm_1", vec![self.n_times, self.n_channels]),
            ("reshape_1", vec![self.n_times, self.n_channels, 1]),
            ("conv2d", vec![self.n_times, 1, self.spatial_filters]),
            ("reshape_2", vec![self.n_times, self.spatial_filters]),
            ("conv1d", vec![l, self.temporal_filters]),
            ("batch_norm_2", vec![l, self.temporal_filters]),
            ("leaky_relu", vec![l, self.temporal_filters]),
            ("flatten", vec![self.flat_len()]),
            ("dense_1", vec![self.hidden]),
            ("dense_2", vec![self.hidden]),
            ("dense_out", vec![1]),
        ]
    }
}

/// Trainable tensors in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tensor {
    Bn1Gamma,
    Bn1Beta,
    Conv2dKernel,
    Conv2dBias,
    Conv1dKernel,
    Conv1dBias,
    Bn2Gamma,
    Bn2Beta,
    Fc1Kernel,
    Fc1Bias,
    Fc2Kernel,
    Fc2Bias,
    OutKernel,
    OutBias,
}

impl Tensor {
    pub const ALL: [Tensor; 14] = [
        Tensor::Bn1Gamma,
        Tensor::Bn1Beta,
        Tensor::Conv2dKernel,
        Tensor::Conv2dBias,
        Tensor::Conv1dKernel,
        Tensor::Conv1dBias,
        Tensor::Bn2Gamma,
        Tensor::Bn2Beta,
        Tensor::Fc1Kernel,
        Tensor::Fc1Bias,
        Tensor::Fc2Kernel,
        Tensor::Fc2Bias,
        Tensor::OutKernel,
        Tensor::OutBias,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Tensor::Bn1Gamma => "batch_norm_1/gamma",
            Tensor::Bn1Beta => "batch_norm_1/beta",
            Tensor::Conv2dKernel => "conv2d/kernel",
            Tensor::Conv2dBias => "conv2d/bias",
            Tensor::Conv1dKernel => "conv1d/kernel",
            Tensor::Conv1dBias => "conv1d/bias",
            Tensor::Bn2Gamma => "batch_norm_2/gamma",
            Tensor::Bn2Beta => "batch_norm_2/beta",
            Tensor::Fc1Kernel => "dense_1/kernel",
            Tensor::Fc1Bias => "dense_1/bias",
            Tensor::Fc2Kernel => "dense_2/kernel",
            Tensor::Fc2Bias => "dense_2/bias",
            Tensor::OutKernel => "dense_out/kernel",
            Tensor::OutBias => "dense_out/bias",
        }
    }

    /// Storage shape; kernels are `fan_in × fan_out` row-major.
    pub fn shape(self, a: &Architecture) -> Vec<usize> {
        match self {
            Tensor::Bn1Gamma | Tensor::Bn1Beta => vec![a.n_channels],
            Tensor::Conv2dKernel => vec![a.n_channels, a.spatial_filters],
            Tensor::Conv2dBias => vec![a.spatial_filters],
            Tensor::Conv1dKernel => vec![a.temporal_kernel, a.spatial_filters, a.temporal_filters],
            Tensor::Conv1dBias | Tensor::Bn2Gamma | Tensor::Bn2Beta => vec![a.temporal_filters],
            Tensor::Fc1Kernel => vec![a.flat_len(), a.hidden],
            Tensor::Fc2Kernel => vec![a.hidden, a.hidden],
            Tensor::Fc1Bias | Tensor::Fc2Bias => vec![a.hidden],
            Tensor::OutKernel => vec![a.hidden],
            Tensor::OutBias => vec![1],
        }
    }

    pub fn len(self, a: &Architecture) -> usize {
        self.shape(a).iter().product()
    }

    /// `(fan_in, fan_out)` for kernels, `None` for biases and batch-norm parameters.
    pub fn fans(self, a: &Architecture) -> Option<(usize, usize)> {
        match self {
            Tensor::Conv2dKernel => Some((a.n_channels, a.n_channels * a.spatial_filters)),
            Tensor::Conv1dKernel => Some((
                a.temporal_kernel * a.spatial_filters,
                a.temporal_kernel * a.temporal_filters,
            )),
            Tensor::Fc1Kernel => Some((a.flat_len(), a.hidden)),
            Tensor::Fc2Kernel => Some((a.hidden, a.hidden)),
            Tensor::OutKernel => Some((a.hidden, 1)),
            _ => None,
        }
    }
}

/// Offsets of every trainable tensor in the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    offsets: [usize; 15],
}

impl Layout {
    pub fn new(arch: &Architecture) -> Self {
        let mut offsets = [0usize; 15];
        for (i, t) in Tensor::ALL.iter().enumerate() {
            offsets[i + 1] = offsets[i] + t.len(arch);
        }
        Self { offsets }
    }

    pub fn range(&self, t: Tensor) -> std::ops::Range<usize> {
        let i = t as usize;
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn total(&self) -> usize {
        self.offsets[14]
    }

    pub fn tensor_of(&self, index: usize) -> Tensor {
        let i = self.offsets[1..].partition_point(|&end| end <= index);
        Tensor::ALL[i]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerCount {
    pub layer: &'static str,
    pub parameters: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParameterCount {
    pub layers: Vec<LayerCount>,
    pub total: usize,
}

/// Parameter counts per listed layer. Batch-norm layers count scale, shift,
/// running mean and running variance.
pub fn count_parameters(arch: &Architecture) -> ParameterCount {
    let c = arch.n_channels;
    let f2 = arch.temporal_filters;
    let n = |t: Tensor| t.len(arch);
    let layers = vec![
        LayerCount {
            layer: "batch_norm_1",
            parameters: 4 * c,
        },
        LayerCount {
            layer: "reshape_1",
            parameters: 0,
        },
        LayerCount {
            layer: "conv2d",
            parameters: n(Tensor::Conv2dKernel) + n(Tensor::Conv2dBias),
        },
        LayerCount {
            layer: "reshape_2",
            parameters: 0,
        },
        LayerCount {
            layer: "conv1d",
            parameters: n(Tensor::Conv1dKernel) + n(Tensor::Conv1dBias),
        },
        LayerCount {
            layer: "batch_norm_2",
            parameters: 4 * f2,
        },
        LayerCount {
            layer: "leaky_relu",
            parameters: 0,
        },
        LayerCount {
            layer: "dense_1",
            parameters: n(Tensor::Fc1Kernel) + n(Tensor::Fc1Bias),
        },
        LayerCount {
            layer: "dense_2",
            parameters: n(Tensor::Fc2Kernel) + n(Tensor::Fc2Bias),
        },
        LayerCount {
            layer: "dense_out",
            parameters: n(Tensor::OutKernel) + n(Tensor::OutBias),
        },
    ];
    let total = layers.iter().map(|l| l.parameters).sum();
    ParameterCount { layers, total }
}
