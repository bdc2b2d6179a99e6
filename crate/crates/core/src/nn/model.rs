//! The spatio-sequential CNN: forward pass, loss and backward pass.
//!
//! Every layer is a dense matrix product over the batch. The spatial convolution
//! (kernel spanning all channels) is `(B·T × C)·(C × F1)`; the temporal convolution
//! has stride equal to its kernel, so consecutive rows of the spatial output
//! already form its `(B·L × K·F1)` patch matrix.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::arch::{Architecture, Layout, Tensor};
use crate::nn::config::TrainConfig;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Batch statistics in the normalization layers, dropout active.
    Training,
    /// Running statistics, dropout disabled.
    Inference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

impl<T: Scalar> RunningStats<T> {
    fn new(n: usize) -> Self {
        Self {
            mean: vec![T::zero(); n],
            var: vec![T::one(); n],
        }
    }

    fn update(&mut self, batch_mean: &Array1<T>, batch_var: &Array1<T>, momentum: T) {
        let keep = T::one() - momentum;
        for (r, &b) in self.mean.iter_mut().zip(batch_mean) {
            *r = momentum * *r + keep * b;
        }
        for (r, &b) in self.var.iter_mut().zip(batch_var) {
            *r = momentum * *r + keep * b;
        }
    }

    fn cast<U: Scalar>(&self) -> RunningStats<U> {
        RunningStats {
            mean: self.mean.iter().map(|v| U::of(v.as_f64())).collect(),
            var: self.var.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpsqModel<T: Scalar> {
    pub(crate) arch: Architecture,
    pub(crate) config: TrainConfig,
    pub(crate) layout: Layout,
    pub(crate) params: Vec<T>,
    pub(crate) bn1: RunningStats<T>,
    pub(crate) bn2: RunningStats<T>,
    pub(crate) mode: Mode,
}

/// Builds the reference architecture with Glorot-uniform kernels, zero biases and
/// identity batch normalization.
pub fn build_spsq_cnn<T: Scalar>(config: &TrainConfig, seed: u64) -> SpsqModel<T> {
    SpsqModel::new(Architecture::default(), config.clone(), seed)
        .expect("reference architecture is valid")
}

impl<T: Scalar> SpsqModel<T> {
    pub fn new(arch: Architecture, config: TrainConfig, seed: u64) -> Result<Self> {
        arch.validate()?;
        config.validate()?;
        let layout = Layout::new(&arch);
        let mut params = vec![T::zero(); layout.total()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in Tensor::ALL {
            let slot = &mut params[layout.range(t)];
            match (t, t.fans(&arch)) {
                (_, Some((fan_in, fan_out))) => {
                    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    for p in slot.iter_mut() {
                        *p = T::of(rng.random_range(-limit..limit));
                    }
                }
                (Tensor::Bn1Gamma | Tensor::Bn2Gamma, None) => slot.fill(T::one()),
                _ => {}
            }
        }
        Ok(Self {
            arch,
            config,
            layout,
            params,
            bn1: RunningStats::new(arch.n_channels),
            bn2: RunningStats::new(arch.temporal_filters),
            mode: Mode::Training,
        })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn tensor(&self, t: Tensor) -> &[T] {
        &self.params[self.layout.range(t)]
    }

    pub fn tensor_mut(&mut self, t: Tensor) -> &mut [T] {
        let r = self.layout.range(t);
        &mut self.params[r]
    }

    pub fn bn1_stats(&self) -> &RunningStats<T> {
        &self.bn1
    }

    pub fn bn2_stats(&self) -> &RunningStats<T> {
        &self.bn2
    }

    pub fn bn1_stats_mut(&mut self) -> &mut RunningStats<T> {
        &mut self.bn1
    }

    pub fn bn2_stats_mut(&mut self) -> &mut RunningStats<T> {
        &mut self.bn2
    }

    /// Converts every parameter and statistic to another scalar type.
    pub fn cast<U: Scalar>(&self) -> SpsqModel<U> {
        SpsqModel {
            arch: self.arch,
            config: self.config.clone(),
            layout: self.layout.clone(),
            params: self.params.iter().map(|v| U::of(v.as_f64())).collect(),
            bn1: self.bn1.cast(),
            bn2: self.bn2.cast(),
            mode: self.mode,
        }
    }

    fn view2(&self, t: Tensor, rows: usize, cols: usize) -> ArrayView2<'_, T> {
        ArrayView2::from_shape((rows, cols), self.tensor(t)).expect("tensor shape")
    }

    fn view1(&self, t: Tensor) -> ArrayView1<'_, T> {
        ArrayView1::from(self.tensor(t))
    }

    fn batch_size_of(&self, len: usize) -> Result<usize> {
        let per = self.arch.input_len();
        if len == 0 || !len.is_multiple_of(per) {
            return Err(Error::Dimension(format!(
                "batch of {len} values is not a whole number of {}×{} inputs",
                self.arch.n_times, self.arch.n_channels
            )));
        }
        Ok(len / per)
    }

    /// Probabilities for a flat `B × n_times × n_channels` batch. Training mode uses
    /// batch statistics and seeded dropout but leaves running statistics untouched.
    pub fn forward(&self, batch: &[T], mode: Mode, dropout_seed: u64) -> Result<Vec<T>> {
        let n = self.batch_size_of(batch.len())?;
        let cache = match mode {
            Mode::Inference => self.forward_cached(batch, n, false, None)?,
            Mode::Training => {
                let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed);
                self.forward_cached(batch, n, true, Some(&mut rng))?
            }
        };
        Ok(cache.probs.to_vec())
    }

    /// Inference-mode probabilities for individual `n_times × n_channels` inputs.
    pub fn predict(&self, inputs: &[&[f32]]) -> Result<Vec<f64>> {
        const CHUNK: usize = 256;
        let per = self.arch.input_len();
        let mut out = Vec::with_capacity(inputs.len());
        let mut buf: Vec<T> = Vec::with_capacity(CHUNK * per);
        for chunk in inputs.chunks(CHUNK) {
            buf.clear();
            for x in chunk {
                if x.len() != per {
                    return Err(Error::Dimension(format!(
                        "input of {} values, expected {per}",
                        x.len()
                    )));
                }
                buf.extend(x.iter().map(|&v| T::of(v as f64)));
            }
            let cache = self.forward_cached(&buf, chunk.len(), false, None)?;
            out.extend(cache.probs.iter().map(|p| p.as_f64()));
        }
        Ok(out)
    }

    /// Per-sample activation shapes observed during an inference pass.
    pub fn shape_trace(&self, batch: &[T]) -> Result<Vec<(&'static str, Vec<usize>)>> {
        let n = self.batch_size_of(batch.len())?;
        let c = self.forward_cached(batch, n, false, None)?;
        let per_sample = |rows: usize, cols: usize| {
            debug_assert_eq!(rows % n, 0);
            (rows / n, cols)
        };
        let (t1, c1) = per_sample(c.bn1_out.nrows(), c.bn1_out.ncols());
        let (t2, f1) = per_sample(c.conv2d_out.nrows(), c.conv2d_out.ncols());
        let (l, f2) = per_sample(c.bn2_out.nrows(), c.bn2_out.ncols());
        Ok(vec![
            ("batch_norm_1", vec![t1, c1]),
            ("reshape_1", vec![t1, c1, 1]),
            ("conv2d", vec![t2, 1, f1]),
            ("reshape_2", vec![t2, f1]),
            ("conv1d", vec![l, f2]),
            ("batch_norm_2", vec![l, f2]),
            ("leaky_relu", vec![l, f2]),
            ("flatten", vec![c.flat.ncols()]),
            ("dense_1", vec![c.h1.ncols()]),
            ("dense_2", vec![c.h2.ncols()]),
            ("dense_out", vec![c.probs.len() / n]),
        ])
    }

    pub(crate) fn forward_cached(
        &self,
        x: &[T],
        batch: usize,
        batch_stats: bool,
        mut dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<ForwardCache<T>> {
        let a = &self.arch;
        if x.len() != batch * a.input_len() {
            return Err(Error::Dimension(format!(
                "batch holds {} values, expected {batch}×{}×{}",
                x.len(),
                a.n_times,
                a.n_channels
            )));
        }
        let eps = T::of(self.config.bn_epsilon);
        let rows1 = batch * a.n_times;
        let rows2 = batch * a.temporal_steps();
        let x = ArrayView2::from_shape((rows1, a.n_channels), x).expect("checked length");

        let (bn1_out, bn1) = bn_forward(
            x,
            self.tensor(Tensor::Bn1Gamma),
            self.tensor(Tensor::Bn1Beta),
            &self.bn1,
            batch_stats,
            eps,
        );

        let mut conv2d_out =
            bn1_out.dot(&self.view2(Tensor::Conv2dKernel, a.n_channels, a.spatial_filters));
        conv2d_out += &self.view1(Tensor::Conv2dBias);

        let patches = conv2d_out
            .view()
            .into_shape_with_order((rows2, a.temporal_kernel * a.spatial_filters))
            .expect("contiguous patches");
        let mut conv1d_out = patches.dot(&self.view2(
            Tensor::Conv1dKernel,
            a.temporal_kernel * a.spatial_filters,
            a.temporal_filters,
        ));
        conv1d_out += &self.view1(Tensor::Conv1dBias);

        let (bn2_out, bn2) = bn_forward(
            conv1d_out.view(),
            self.tensor(Tensor::Bn2Gamma),
            self.tensor(Tensor::Bn2Beta),
            &self.bn2,
            batch_stats,
            eps,
        );

        let slope = T::of(self.config.leaky_slope);
        let flat = bn2_out
            .mapv(|v| if v > T::zero() { v } else { slope * v })
            .into_shape_with_order((batch, a.flat_len()))
            .expect("contiguous activations");

        let rate = self.config.dropout_rate;
        let mut z1 = flat.dot(&self.view2(Tensor::Fc1Kernel, a.flat_len(), a.hidden));
        z1 += &self.view1(Tensor::Fc1Bias);
        let h1 = z1.mapv(T::tanh);
        let (d1, mask1) = dropout_layer(&h1, rate, dropout.as_deref_mut());

        let mut z2 = d1.dot(&self.view2(Tensor::Fc2Kernel, a.hidden, a.hidden));
        z2 += &self.view1(Tensor::Fc2Bias);
        let h2 = z2.mapv(T::tanh);
        let (d2, mask2) = dropout_layer(&h2, rate, dropout);

        let bias = self.tensor(Tensor::OutBias)[0];
        let logits = d2.dot(&self.view1(Tensor::OutKernel)).mapv(|z| z + bias);
        let probs = logits.mapv(sigmoid);

        Ok(ForwardCache {
            batch,
            bn1,
            bn1_out,
            conv2d_out,
            bn2,
            bn2_out,
            flat,
            h1,
            mask1,
            d1,
            h2,
            mask2,
            d2,
            probs,
        })
    }

    /// Gradient of the mean loss with respect to every trainable parameter, given
    /// the loss gradient at the logits.
    pub(crate) fn backward(&self, c: &ForwardCache<T>, dlogits: &Array1<T>) -> Vec<T> {
        let a = &self.arch;
        let l = &self.layout;
        let mut grads = vec![T::zero(); l.total()];
        let rows1 = c.batch * a.n_times;
        let rows2 = c.batch * a.temporal_steps();
        let mut put = |t: Tensor, g: &[T]| grads[l.range(t)].copy_from_slice(g);

        // output layer
        let w_out = self.view1(Tensor::OutKernel);
        put(Tensor::OutKernel, c.d2.t().dot(dlogits).as_slice().unwrap());
        put(Tensor::OutBias, &[dlogits.sum()]);
        let dd2 = outer(dlogits, &w_out);

        // dense 2
        let dz2 = tanh_backward(&dropout_backward(dd2, c.mask2.as_ref()), &c.h2);
        put(Tensor::Fc2Kernel, as_flat(&c.d1.t().dot(&dz2)));
        put(Tensor::Fc2Bias, dz2.sum_axis(Axis(0)).as_slice().unwrap());
        let dd1 = dz2.dot(&self.view2(Tensor::Fc2Kernel, a.hidden, a.hidden).t());

        // dense 1
        let dz1 = tanh_backward(&dropout_backward(dd1, c.mask1.as_ref()), &c.h1);
        put(Tensor::Fc1Kernel, as_flat(&c.flat.t().dot(&dz1)));
        put(Tensor::Fc1Bias, dz1.sum_axis(Axis(0)).as_slice().unwrap());
        let dflat = dz1.dot(&self.view2(Tensor::Fc1Kernel, a.flat_len(), a.hidden).t());

        // leaky ReLU + batch norm 2
        let slope = T::of(self.config.leaky_slope);
        let mut dbn2 = dflat
            .into_shape_with_order((rows2, a.temporal_filters))
            .expect("contiguous");
        ndarray::Zip::from(&mut dbn2)
            .and(&c.bn2_out)
            .for_each(|g, &pre| {
                if pre <= T::zero() {
                    *g *= slope;
                }
            });
        let (dconv1d, dgamma2, dbeta2) =
            bn_backward(dbn2.view(), &c.bn2, self.tensor(Tensor::Bn2Gamma));
        put(Tensor::Bn2Gamma, dgamma2.as_slice().unwrap());
        put(Tensor::Bn2Beta, dbeta2.as_slice().unwrap());

        // temporal convolution
        let patch_cols = a.temporal_kernel * a.spatial_filters;
        let patches = c
            .conv2d_out
            .view()
            .into_shape_with_order((rows2, patch_cols))
            .expect("contiguous");
        put(Tensor::Conv1dKernel, as_flat(&patches.t().dot(&dconv1d)));
        put(
            Tensor::Conv1dBias,
            dconv1d.sum_axis(Axis(0)).as_slice().unwrap(),
        );
        let dpatches = dconv1d.dot(
            &self
                .view2(Tensor::Conv1dKernel, patch_cols, a.temporal_filters)
                .t(),
        );
        let dconv2d = dpatches
            .into_shape_with_order((rows1, a.spatial_filters))
            .expect("contiguous");

        // spatial convolution
        put(Tensor::Conv2dKernel, as_flat(&c.bn1_out.t().dot(&dconv2d)));
        put(
            Tensor::Conv2dBias,
            dconv2d.sum_axis(Axis(0)).as_slice().unwrap(),
        );
        let dbn1 = dconv2d.dot(
            &self
                .view2(Tensor::Conv2dKernel, a.n_channels, a.spatial_filters)
                .t(),
        );

        let (_, dgamma1, dbeta1) = bn_backward(dbn1.view(), &c.bn1, self.tensor(Tensor::Bn1Gamma));
        put(Tensor::Bn1Gamma, dgamma1.as_slice().unwrap());
        put(Tensor::Bn1Beta, dbeta1.as_slice().unwrap());
        grads
    }

    pub(crate) fn update_running_stats(&mut self, c: &ForwardCache<T>) {
        let m = T::of(self.config.bn_momentum);
        if let (Some(mean), Some(var)) = (&c.bn1.batch_mean, &c.bn1.batch_var) {
            self.bn1.update(mean, var, m);
        }
        if let (Some(mean), Some(var)) = (&c.bn2.batch_mean, &c.bn2.batch_var) {
            self.bn2.update(mean, var, m);
        }
    }
}

pub(crate) struct BnCache<T> {
    xhat: Array2<T>,
    inv_std: Array1<T>,
    batch_mean: Option<Array1<T>>,
    batch_var: Option<Array1<T>>,
}

pub(crate) struct ForwardCache<T> {
    pub batch: usize,
    bn1: BnCache<T>,
    bn1_out: Array2<T>,
    conv2d_out: Array2<T>,
    bn2: BnCache<T>,
    bn2_out: Array2<T>,
    flat: Array2<T>,
    h1: Array2<T>,
    mask1: Option<Array2<T>>,
    d1: Array2<T>,
    h2: Array2<T>,
    mask2: Option<Array2<T>>,
    d2: Array2<T>,
    pub probs: Array1<T>,
}

fn as_flat<T: Scalar>(a: &Array2<T>) -> &[T] {
    a.as_slice().expect("standard layout")
}

fn outer<T: Scalar>(col: &Array1<T>, row: &ArrayView1<T>) -> Array2<T> {
    let mut out = Array2::zeros((col.len(), row.len()));
    for (mut r, &c) in out.rows_mut().into_iter().zip(col) {
        r.assign(&row.mapv(|v| v * c));
    }
    out
}

pub(crate) fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

fn tanh_backward<T: Scalar>(dy: &Array2<T>, y: &Array2<T>) -> Array2<T> {
    let mut out = dy.clone();
    ndarray::Zip::from(&mut out)
        .and(y)
        .for_each(|g, &h| *g *= T::one() - h * h);
    out
}

/// Inverted dropout: kept units are scaled by `1 / (1 - rate)`.
pub(crate) fn dropout_layer<T: Scalar>(
    h: &Array2<T>,
    rate: f64,
    rng: Option<&mut ChaCha8Rng>,
) -> (Array2<T>, Option<Array2<T>>) {
    match rng {
        Some(rng) if rate > 0.0 => {
            let keep = 1.0 - rate;
            let scale = T::of(1.0 / keep);
            let mask = h.mapv(|_| {
                if rng.random::<f64>() < keep {
                    scale
                } else {
                    T::zero()
                }
            });
            (h * &mask, Some(mask))
        }
        _ => (h.clone(), None),
    }
}

fn dropout_backward<T: Scalar>(dy: Array2<T>, mask: Option<&Array2<T>>) -> Array2<T> {
    match mask {
        Some(m) => dy * m,
        None => dy,
    }
}

fn bn_forward<T: Scalar>(
    x: ArrayView2<T>,
    gamma: &[T],
    beta: &[T],
    stats: &RunningStats<T>,
    batch_stats: bool,
    eps: T,
) -> (Array2<T>, BnCache<T>) {
    let (mean, var, batch_mean, batch_var) = if batch_stats {
        let n = T::of(x.nrows() as f64);
        let mean = x.sum_axis(Axis(0)) / n;
        let var = (&x - &mean).mapv(|v| v * v).sum_axis(Axis(0)) / n;
        (mean.clone(), var.clone(), Some(mean), Some(var))
    } else {
        (
            Array1::from(stats.mean.clone()),
            Array1::from(stats.var.clone()),
            None,
            None,
        )
    };
    let inv_std = var.mapv(|v| T::one() / (v + eps).sqrt());
    let xhat = (&x - &mean) * &inv_std;
    let y = &xhat * &ArrayView1::from(gamma) + ArrayView1::from(beta);
    (
        y,
        BnCache {
            xhat,
            inv_std,
            batch_mean,
            batch_var,
        },
    )
}

/// Returns `(dx, dgamma, dbeta)`.
fn bn_backward<T: Scalar>(
    dy: ArrayView2<T>,
    cache: &BnCache<T>,
    gamma: &[T],
) -> (Array2<T>, Array1<T>, Array1<T>) {
    let dgamma = (&dy * &cache.xhat).sum_axis(Axis(0));
    let dbeta = dy.sum_axis(Axis(0));
    let dxhat = &dy * &ArrayView1::from(gamma);
    let dx = if cache.batch_mean.is_some() {
        let n = T::of(dy.nrows() as f64);
        let sum_dxhat = dxhat.sum_axis(Axis(0));
        let sum_dxhat_xhat = (&dxhat * &cache.xhat).sum_axis(Axis(0));
        let scale = cache.inv_std.mapv(|s| s / n);
        (dxhat * n - &sum_dxhat - &cache.xhat * &sum_dxhat_xhat) * &scale
    } else {
        dxhat * &cache.inv_std
    };
    (dx, dgamma, dbeta)
}

/// Mean binary cross-entropy with clamped probabilities and its gradient at the
/// logits, `(p - y) / B`.
pub(crate) fn bce_loss<T: Scalar>(
    probs: &Array1<T>,
    labels: &[bool],
    clamp: f64,
) -> (T, Array1<T>) {
    let n = T::of(probs.len() as f64);
    let lo = T::of(clamp);
    let hi = T::one() - lo;
    let mut loss = T::zero();
    let mut grad = Array1::zeros(probs.len());
    for ((&p, &y), g) in probs.iter().zip(labels).zip(grad.iter_mut()) {
        let pc = p.max(lo).min(hi);
        let target = if y { T::one() } else { T::zero() };
        loss -= target * pc.ln() + (T::one() - target) * (T::one() - pc).ln();
        *g = (p - target) / n;
    }
    (loss / n, grad)
}
