//! The five layer kinds the probe nets are built from, with hand-written
//! forward and backward passes.
//!
//! Activations are NHWC `[n, h, w, c]` for spatial layers and `[n, d]` after
//! flattening. Convolutions use stride 1; kernel size and zero padding are
//! per-layer fields. All reductions accumulate sequentially in a fixed index
//! order so repeated runs are bit-identical.

use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Forward-pass mode. Train mode caches intermediates for `backward` and
/// updates batch-norm running statistics; eval mode does neither.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Per-image feature shape used for static shape and FLOP propagation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureShape {
    Spatial { h: usize, w: usize, c: usize },
    Flat { d: usize },
}

/// Declarative layer description; parameter counts and output shapes follow
/// closed forms, the runtime layer is built from it by [`super::net::Net`].
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Conv2d {
        kernel_h: usize,
        kernel_w: usize,
        in_ch: usize,
        out_ch: usize,
        pad: usize,
    },
    BatchNorm {
        channels: usize,
        eps: f64,
        momentum: f64,
    },
    MaxPool2x2,
    Relu,
    Flatten,
    Dense {
        in_dim: usize,
        out_dim: usize,
    },
}

impl LayerSpec {
    pub fn conv3x3(in_ch: usize, out_ch: usize) -> Self {
        LayerSpec::Conv2d {
            kernel_h: 3,
            kernel_w: 3,
            in_ch,
            out_ch,
            pad: 1,
        }
    }

    pub fn batch_norm(channels: usize) -> Self {
        LayerSpec::BatchNorm {
            channels,
            eps: 1e-5,
            momentum: 0.1,
        }
    }

    /// Number of trainable parameters:
    /// `kh*kw*c_in*c_out + c_out` for conv, `d_in*d_out + d_out` for dense,
    /// `2*c` for batch norm, zero otherwise.
    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Conv2d {
                kernel_h,
                kernel_w,
                in_ch,
                out_ch,
                ..
            } => kernel_h * kernel_w * in_ch * out_ch + out_ch,
            LayerSpec::BatchNorm { channels, .. } => 2 * channels,
            LayerSpec::Dense { in_dim, out_dim } => in_dim * out_dim + out_dim,
            LayerSpec::MaxPool2x2 | LayerSpec::Relu | LayerSpec::Flatten => 0,
        }
    }

    /// Per-image output shape given the input shape.
    pub fn out_shape(&self, input: FeatureShape) -> Result<FeatureShape> {
        match (self, input) {
            (
                LayerSpec::Conv2d {
                    kernel_h,
                    kernel_w,
                    in_ch,
                    out_ch,
                    pad,
                },
                FeatureShape::Spatial { h, w, c },
            ) => {
                if c != *in_ch {
                    return Err(Error::Shape {
                        layer: 0,
                        msg: format!("conv expects {in_ch} input channels, got {c}"),
                    });
                }
                let oh = (h + 2 * pad).saturating_sub(*kernel_h - 1);
                let ow = (w + 2 * pad).saturating_sub(*kernel_w - 1);
                if oh == 0 || ow == 0 {
                    return Err(Error::Shape {
                        layer: 0,
                        msg: format!("conv kernel {kernel_h}x{kernel_w} larger than padded {h}x{w} input"),
                    });
                }
                Ok(FeatureShape::Spatial {
                    h: oh,
                    w: ow,
                    c: *out_ch,
                })
            }
            (LayerSpec::BatchNorm { channels, .. }, FeatureShape::Spatial { h, w, c }) => {
                if c != *channels {
                    return Err(Error::Shape {
                        layer: 0,
                        msg: format!("batchnorm expects {channels} channels, got {c}"),
                    });
                }
                Ok(FeatureShape::Spatial { h, w, c })
            }
            (LayerSpec::MaxPool2x2, FeatureShape::Spatial { h, w, c }) => {
                if h < 2 || w < 2 {
                    return Err(Error::Shape {
                        layer: 0,
                        msg: format!("maxpool2x2 needs at least 2x2 input, got {h}x{w}"),
                    });
                }
                Ok(FeatureShape::Spatial {
                    h: h / 2,
                    w: w / 2,
                    c,
                })
            }
            (LayerSpec::Relu, shape) => Ok(shape),
            (LayerSpec::Flatten, FeatureShape::Spatial { h, w, c }) => {
                Ok(FeatureShape::Flat { d: h * w * c })
            }
            (LayerSpec::Flatten, FeatureShape::Flat { d }) => Ok(FeatureShape::Flat { d }),
            (LayerSpec::Dense { in_dim, out_dim }, FeatureShape::Flat { d }) => {
                if d != *in_dim {
                    return Err(Error::Shape {
                        layer: 0,
                        msg: format!("dense expects width {in_dim}, got {d}"),
                    });
                }
                Ok(FeatureShape::Flat { d: *out_dim })
            }
            (spec, shape) => Err(Error::Shape {
                layer: 0,
                msg: format!("{spec:?} cannot consume {shape:?}"),
            }),
        }
    }

    /// Analytic per-image forward FLOP estimate (multiply and add counted
    /// separately), used for the probe-net cost model.
    pub fn flops(&self, input: FeatureShape) -> Result<u64> {
        let out = self.out_shape(input)?;
        Ok(match (self, out) {
            (
                LayerSpec::Conv2d {
                    kernel_h,
                    kernel_w,
                    in_ch,
                    ..
                },
                FeatureShape::Spatial { h, w, c },
            ) => (2 * kernel_h * kernel_w * in_ch + 1) as u64 * (h * w * c) as u64,
            (LayerSpec::BatchNorm { .. }, FeatureShape::Spatial { h, w, c }) => {
                4 * (h * w * c) as u64
            }
            (LayerSpec::MaxPool2x2, FeatureShape::Spatial { h, w, c }) => 3 * (h * w * c) as u64,
            (LayerSpec::Relu, FeatureShape::Spatial { h, w, c }) => (h * w * c) as u64,
            (LayerSpec::Relu, FeatureShape::Flat { d }) => d as u64,
            (LayerSpec::Flatten, _) => 0,
            (LayerSpec::Dense { in_dim, out_dim }, _) => (2 * in_dim + 1) as u64 * *out_dim as u64,
            _ => 0,
        })
    }
}

// c[i][j] += sum_k a[i][k] * b[k][j]; all row-major, inner loop contiguous.
pub(crate) fn matmul_acc<F: Scalar>(
    a: &[F],
    b: &[F],
    c: &mut [F],
    m: usize,
    k_dim: usize,
    n: usize,
) {
    debug_assert_eq!(a.len(), m * k_dim);
    debug_assert_eq!(b.len(), k_dim * n);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let a_row = &a[i * k_dim..(i + 1) * k_dim];
        let c_row = &mut c[i * n..(i + 1) * n];
        for (k, &av) in a_row.iter().enumerate() {
            if av == F::zero() {
                continue;
            }
            let b_row = &b[k * n..(k + 1) * n];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv += av * bv;
            }
        }
    }
}

// c[k][j] += sum_r a[r][k] * b[r][j]  (i.e. c += a^T b).
pub(crate) fn matmul_at_b<F: Scalar>(
    a: &[F],
    b: &[F],
    c: &mut [F],
    rows: usize,
    k_dim: usize,
    n: usize,
) {
    debug_assert_eq!(a.len(), rows * k_dim);
    debug_assert_eq!(b.len(), rows * n);
    debug_assert_eq!(c.len(), k_dim * n);
    for r in 0..rows {
        let a_row = &a[r * k_dim..(r + 1) * k_dim];
        let b_row = &b[r * n..(r + 1) * n];
        for (k, &av) in a_row.iter().enumerate() {
            if av == F::zero() {
                continue;
            }
            let c_row = &mut c[k * n..(k + 1) * n];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv += av * bv;
            }
        }
    }
}

fn shape4(x: &Tensor<impl Scalar>, what: &str) -> Result<[usize; 4]> {
    match *x.shape() {
        [n, h, w, c] => Ok([n, h, w, c]),
        ref s => Err(Error::Shape {
            layer: 0,
            msg: format!("{what} expects a [n,h,w,c] tensor, got {s:?}"),
        }),
    }
}

fn shape2(x: &Tensor<impl Scalar>, what: &str) -> Result<[usize; 2]> {
    match *x.shape() {
        [n, d] => Ok([n, d]),
        ref s => Err(Error::Shape {
            layer: 0,
            msg: format!("{what} expects a [n,d] tensor, got {s:?}"),
        }),
    }
}

/// 2-D convolution, stride 1, zero padding, computed through im2col and a
/// dense matrix product. Weight layout is `[kh*kw*c_in, c_out]` with the
/// row index ordered (ky, kx, c_in).
#[derive(Debug, Clone)]
pub struct Conv2d<F: Scalar> {
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub in_ch: usize,
    pub out_ch: usize,
    pub pad: usize,
    pub weight: Tensor<F>,
    pub bias: Tensor<F>,
    cache: Option<ConvCache<F>>,
}

#[derive(Debug, Clone)]
struct ConvCache<F> {
    x_col: Vec<F>,
    rows: usize,
    in_shape: [usize; 4],
}

impl<F: Scalar> Conv2d<F> {
    pub fn new(
        kernel_h: usize,
        kernel_w: usize,
        in_ch: usize,
        out_ch: usize,
        pad: usize,
        weight: Tensor<F>,
        bias: Tensor<F>,
    ) -> Self {
        debug_assert_eq!(weight.numel(), kernel_h * kernel_w * in_ch * out_ch);
        debug_assert_eq!(bias.numel(), out_ch);
        Conv2d {
            kernel_h,
            kernel_w,
            in_ch,
            out_ch,
            pad,
            weight,
            bias,
            cache: None,
        }
    }

    fn out_dims(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let oh = (h + 2 * self.pad + 1).saturating_sub(self.kernel_h);
        let ow = (w + 2 * self.pad + 1).saturating_sub(self.kernel_w);
        if oh == 0 || ow == 0 {
            return Err(Error::Shape {
                layer: 0,
                msg: format!(
                    "conv kernel {}x{} larger than padded {h}x{w} input",
                    self.kernel_h, self.kernel_w
                ),
            });
        }
        Ok((oh, ow))
    }

    fn im2col(&self, x: &[F], n: usize, h: usize, w: usize, oh: usize, ow: usize) -> Vec<F> {
        let k_dim = self.kernel_h * self.kernel_w * self.in_ch;
        let c_in = self.in_ch;
        let mut col = vec![F::zero(); n * oh * ow * k_dim];
        let pad = self.pad as isize;
        for img in 0..n {
            let x_img = &x[img * h * w * c_in..(img + 1) * h * w * c_in];
            for oy in 0..oh {
                for ox in 0..ow {
                    let row = ((img * oh + oy) * ow + ox) * k_dim;
                    let mut k = row;
                    for ky in 0..self.kernel_h {
                        let iy = oy as isize + ky as isize - pad;
                        if iy < 0 || iy >= h as isize {
                            k += self.kernel_w * c_in;
                            continue;
                        }
                        let row_base = iy as usize * w * c_in;
                        for kx in 0..self.kernel_w {
                            let ix = ox as isize + kx as isize - pad;
                            if ix < 0 || ix >= w as isize {
                                k += c_in;
                                continue;
                            }
                            let src = row_base + ix as usize * c_in;
                            col[k..k + c_in].copy_from_slice(&x_img[src..src + c_in]);
                            k += c_in;
                        }
                    }
                }
            }
        }
        col
    }

    pub fn forward(&mut self, x: &Tensor<F>, mode: Mode) -> Result<Tensor<F>> {
        let [n, h, w, c] = shape4(x, "conv2d")?;
        if c != self.in_ch {
            return Err(Error::Shape {
                layer: 0,
                msg: format!("conv expects {} input channels, got {c}", self.in_ch),
            });
        }
        let (oh, ow) = self.out_dims(h, w)?;
        let k_dim = self.kernel_h * self.kernel_w * self.in_ch;
        let rows = n * oh * ow;
        let x_col = self.im2col(x.data(), n, h, w, oh, ow);

        let mut out = vec![F::zero(); rows * self.out_ch];
        for r in 0..rows {
            out[r * self.out_ch..(r + 1) * self.out_ch].copy_from_slice(self.bias.data());
        }
        matmul_acc(&x_col, self.weight.data(), &mut out, rows, k_dim, self.out_ch);

        if mode == Mode::Train {
            self.cache = Some(ConvCache {
                x_col,
                rows,
                in_shape: [n, h, w, c],
            });
        }
        Tensor::new(&[n, oh, ow, self.out_ch], out)
    }

    pub fn backward(&mut self, dy: &Tensor<F>) -> Result<Tensor<F>> {
        let cache = self.cache.take().ok_or_else(|| {
            Error::State("conv2d backward called without a preceding train-mode forward".into())
        })?;
        let [n, h, w, _] = cache.in_shape;
        let k_dim = self.kernel_h * self.kernel_w * self.in_ch;
        let rows = cache.rows;
        debug_assert_eq!(dy.numel(), rows * self.out_ch);

        // dW += X_col^T dY, db += column sums of dY.
        matmul_at_b(
            &cache.x_col,
            dy.data(),
            self.weight.grad_mut(),
            rows,
            k_dim,
            self.out_ch,
        );
        {
            let db = self.bias.grad_mut();
            for r in 0..rows {
                let dy_row = &dy.data()[r * self.out_ch..(r + 1) * self.out_ch];
                for (g, &v) in db.iter_mut().zip(dy_row) {
                    *g += v;
                }
            }
        }

        // dX_col = dY W^T, then scatter-add back to image layout.
        let mut w_t = vec![F::zero(); self.out_ch * k_dim];
        for k in 0..k_dim {
            for c in 0..self.out_ch {
                w_t[c * k_dim + k] = self.weight.data()[k * self.out_ch + c];
            }
        }
        let mut dx_col = vec![F::zero(); rows * k_dim];
        matmul_acc(dy.data(), &w_t, &mut dx_col, rows, self.out_ch, k_dim);

        let (oh, ow) = self.out_dims(h, w)?;
        let c_in = self.in_ch;
        let pad = self.pad as isize;
        let mut dx = vec![F::zero(); n * h * w * c_in];
        for img in 0..n {
            let dx_img = &mut dx[img * h * w * c_in..(img + 1) * h * w * c_in];
            for oy in 0..oh {
                for ox in 0..ow {
                    let row = ((img * oh + oy) * ow + ox) * k_dim;
                    let mut k = row;
                    for ky in 0..self.kernel_h {
                        let iy = oy as isize + ky as isize - pad;
                        if iy < 0 || iy >= h as isize {
                            k += self.kernel_w * c_in;
                            continue;
                        }
                        let row_base = iy as usize * w * c_in;
                        for kx in 0..self.kernel_w {
                            let ix = ox as isize + kx as isize - pad;
                            if ix < 0 || ix >= w as isize {
                                k += c_in;
                                continue;
                            }
                            let dst = row_base + ix as usize * c_in;
                            for ch in 0..c_in {
                                dx_img[dst + ch] += dx_col[k + ch];
                            }
                            k += c_in;
                        }
                    }
                }
            }
        }
        Tensor::new(&[n, h, w, c_in], dx)
    }
}

/// Batch normalization over the channel axis of NHWC input. Training uses
/// biased batch statistics; running statistics store the same biased
/// variance so a frozen layer reproduces train-mode output in eval mode.
#[derive(Debug, Clone)]
pub struct BatchNorm<F: Scalar> {
    pub channels: usize,
    pub eps: f64,
    /// Update weight for running statistics:
    /// `running = (1 - momentum) * running + momentum * batch`.
    pub momentum: f64,
    pub gamma: Tensor<F>,
    pub beta: Tensor<F>,
    pub running_mean: Vec<F>,
    pub running_var: Vec<F>,
    cache: Option<BnCache<F>>,
}

#[derive(Debug, Clone)]
struct BnCache<F> {
    x_hat: Vec<F>,
    inv_std: Vec<F>,
    in_shape: [usize; 4],
}

impl<F: Scalar> BatchNorm<F> {
    pub fn new(channels: usize, eps: f64, momentum: f64) -> Self {
        BatchNorm {
            channels,
            eps,
            momentum,
            gamma: Tensor::full(&[channels], F::one()),
            beta: Tensor::zeros(&[channels]),
            running_mean: vec![F::zero(); channels],
            running_var: vec![F::one(); channels],
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Tensor<F>, mode: Mode) -> Result<Tensor<F>> {
        let [n, h, w, c] = shape4(x, "batchnorm")?;
        if c != self.channels {
            return Err(Error::Shape {
                layer: 0,
                msg: format!("batchnorm expects {} channels, got {c}", self.channels),
            });
        }
        let m = n * h * w;
        let data = x.data();
        let mut out = vec![F::zero(); data.len()];
        let eps = F::from_double(self.eps);

        match mode {
            Mode::Train => {
                let m_f = F::from_double(m as f64);
                let mut mean = vec![F::zero(); c];
                for px in 0..m {
                    for ch in 0..c {
                        mean[ch] += data[px * c + ch];
                    }
                }
                for v in mean.iter_mut() {
                    *v /= m_f;
                }
                let mut var = vec![F::zero(); c];
                for px in 0..m {
                    for ch in 0..c {
                        let d = data[px * c + ch] - mean[ch];
                        var[ch] += d * d;
                    }
                }
                for v in var.iter_mut() {
                    *v /= m_f;
                }
                let inv_std: Vec<F> = var.iter().map(|&v| (v + eps).sqrt().recip()).collect();

                let mut x_hat = vec![F::zero(); data.len()];
                let g = self.gamma.data();
                let b = self.beta.data();
                for px in 0..m {
                    for ch in 0..c {
                        let xh = (data[px * c + ch] - mean[ch]) * inv_std[ch];
                        x_hat[px * c + ch] = xh;
                        out[px * c + ch] = g[ch] * xh + b[ch];
                    }
                }

                let mom = F::from_double(self.momentum);
                let keep = F::one() - mom;
                for ch in 0..c {
                    self.running_mean[ch] = keep * self.running_mean[ch] + mom * mean[ch];
                    self.running_var[ch] = keep * self.running_var[ch] + mom * var[ch];
                }
                self.cache = Some(BnCache {
                    x_hat,
                    inv_std,
                    in_shape: [n, h, w, c],
                });
            }
            Mode::Eval => {
                let g = self.gamma.data();
                let b = self.beta.data();
                let inv_std: Vec<F> = self
                    .running_var
                    .iter()
                    .map(|&v| (v + eps).sqrt().recip())
                    .collect();
                for px in 0..m {
                    for ch in 0..c {
                        let xh = (data[px * c + ch] - self.running_mean[ch]) * inv_std[ch];
                        out[px * c + ch] = g[ch] * xh + b[ch];
                    }
                }
            }
        }
        Tensor::new(&[n, h, w, c], out)
    }

    pub fn backward(&mut self, dy: &Tensor<F>) -> Result<Tensor<F>> {
        let cache = self.cache.take().ok_or_else(|| {
            Error::State("batchnorm backward called without a preceding train-mode forward".into())
        })?;
        let [n, h, w, c] = cache.in_shape;
        let m = n * h * w;
        let m_f = F::from_double(m as f64);
        let dy = dy.data();
        debug_assert_eq!(dy.len(), m * c);

        let mut sum_dy = vec![F::zero(); c];
        let mut sum_dy_xhat = vec![F::zero(); c];
        for px in 0..m {
            for ch in 0..c {
                let g = dy[px * c + ch];
                sum_dy[ch] += g;
                sum_dy_xhat[ch] += g * cache.x_hat[px * c + ch];
            }
        }
        {
            let dgamma = self.gamma.grad_mut();
            for (gr, &s) in dgamma.iter_mut().zip(&sum_dy_xhat) {
                *gr += s;
            }
        }
        {
            let dbeta = self.beta.grad_mut();
            for (gr, &s) in dbeta.iter_mut().zip(&sum_dy) {
                *gr += s;
            }
        }

        // dx = gamma * inv_std * (dy - mean(dy) - x_hat * mean(dy*x_hat))
        let g = self.gamma.data();
        let mut dx = vec![F::zero(); m * c];
        for px in 0..m {
            for ch in 0..c {
                let idx = px * c + ch;
                let term = dy[idx] - sum_dy[ch] / m_f - cache.x_hat[idx] * sum_dy_xhat[ch] / m_f;
                dx[idx] = g[ch] * cache.inv_std[ch] * term;
            }
        }
        Tensor::new(&[n, h, w, c], dx)
    }
}

/// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
#[derive(Debug, Clone, Default)]
pub struct MaxPool2x2 {
    argmax: Option<(Vec<u32>, [usize; 4])>,
}

impl MaxPool2x2 {
    pub fn forward<F: Scalar>(&mut self, x: &Tensor<F>, mode: Mode) -> Result<Tensor<F>> {
        let [n, h, w, c] = shape4(x, "maxpool2x2")?;
        if h < 2 || w < 2 {
            return Err(Error::Shape {
                layer: 0,
                msg: format!("maxpool2x2 needs at least 2x2 input, got {h}x{w}"),
            });
        }
        let (oh, ow) = (h / 2, w / 2);
        let data = x.data();
        let mut out = vec![F::zero(); n * oh * ow * c];
        let mut argmax = vec![0u32; out.len()];
        for img in 0..n {
            let base = img * h * w * c;
            for oy in 0..oh {
                for ox in 0..ow {
                    for ch in 0..c {
                        let mut best_idx = base + ((2 * oy) * w + 2 * ox) * c + ch;
                        let mut best = data[best_idx];
                        for (dy, dx) in [(0usize, 1usize), (1, 0), (1, 1)] {
                            let idx = base + ((2 * oy + dy) * w + 2 * ox + dx) * c + ch;
                            if data[idx] > best {
                                best = data[idx];
                                best_idx = idx;
                            }
                        }
                        let o = ((img * oh + oy) * ow + ox) * c + ch;
                        out[o] = best;
                        argmax[o] = best_idx as u32;
                    }
                }
            }
        }
        if mode == Mode::Train {
            self.argmax = Some((argmax, [n, h, w, c]));
        }
        Tensor::new(&[n, oh, ow, c], out)
    }

    pub fn backward<F: Scalar>(&mut self, dy: &Tensor<F>) -> Result<Tensor<F>> {
        let (argmax, in_shape) = self.argmax.take().ok_or_else(|| {
            Error::State("maxpool backward called without a preceding train-mode forward".into())
        })?;
        let mut dx = vec![F::zero(); in_shape.iter().product()];
        for (o, &src) in argmax.iter().enumerate() {
            dx[src as usize] += dy.data()[o];
        }
        Tensor::new(&in_shape, dx)
    }
}

/// Elementwise `max(0, x)`; the derivative at exactly 0 is taken as 0.
#[derive(Debug, Clone, Default)]
pub struct Relu<F: Scalar> {
    mask: Option<Vec<F>>,
}

impl<F: Scalar> Relu<F> {
    pub fn forward(&mut self, x: &Tensor<F>, mode: Mode) -> Result<Tensor<F>> {
        let out: Vec<F> = x
            .data()
            .iter()
            .map(|&v| if v > F::zero() { v } else { F::zero() })
            .collect();
        if mode == Mode::Train {
            self.mask = Some(
                x.data()
                    .iter()
                    .map(|&v| if v > F::zero() { F::one() } else { F::zero() })
                    .collect(),
            );
        }
        Tensor::new(x.shape(), out)
    }

    pub fn backward(&mut self, dy: &Tensor<F>) -> Result<Tensor<F>> {
        let mask = self.mask.take().ok_or_else(|| {
            Error::State("relu backward called without a preceding train-mode forward".into())
        })?;
        let dx: Vec<F> = dy.data().iter().zip(&mask).map(|(&g, &m)| g * m).collect();
        Tensor::new(dy.shape(), dx)
    }
}

/// Reshape `[n, h, w, c]` to `[n, h*w*c]`.
#[derive(Debug, Clone, Default)]
pub struct Flatten {
    in_shape: Option<[usize; 4]>,
}

impl Flatten {
    pub fn forward<F: Scalar>(&mut self, x: &Tensor<F>, mode: Mode) -> Result<Tensor<F>> {
        let [n, h, w, c] = shape4(x, "flatten")?;
        if mode == Mode::Train {
            self.in_shape = Some([n, h, w, c]);
        }
        Tensor::new(&[n, h * w * c], x.data().to_vec())
    }

    pub fn backward<F: Scalar>(&mut self, dy: &Tensor<F>) -> Result<Tensor<F>> {
        let in_shape = self.in_shape.take().ok_or_else(|| {
            Error::State("flatten backward called without a preceding train-mode forward".into())
        })?;
        Tensor::new(&in_shape, dy.data().to_vec())
    }
}

/// Fully connected layer `y = x W + b`, weight layout `[in_dim, out_dim]`.
#[derive(Debug, Clone)]
pub struct Dense<F: Scalar> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Tensor<F>,
    pub bias: Tensor<F>,
    cache: Option<Vec<F>>,
}

impl<F: Scalar> Dense<F> {
    pub fn new(in_dim: usize, out_dim: usize, weight: Tensor<F>, bias: Tensor<F>) -> Self {
        debug_assert_eq!(weight.numel(), in_dim * out_dim);
        debug_assert_eq!(bias.numel(), out_dim);
        Dense {
            in_dim,
            out_dim,
            weight,
            bias,
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Tensor<F>, mode: Mode) -> Result<Tensor<F>> {
        let [n, d] = shape2(x, "dense")?;
        if d != self.in_dim {
            return Err(Error::Shape {
                layer: 0,
                msg: format!("dense expects width {}, got {d}", self.in_dim),
            });
        }
        let mut out = vec![F::zero(); n * self.out_dim];
        for r in 0..n {
            out[r * self.out_dim..(r + 1) * self.out_dim].copy_from_slice(self.bias.data());
        }
        matmul_acc(x.data(), self.weight.data(), &mut out, n, d, self.out_dim);
        if mode == Mode::Train {
            self.cache = Some(x.data().to_vec());
        }
        Tensor::new(&[n, self.out_dim], out)
    }

    pub fn backward(&mut self, dy: &Tensor<F>) -> Result<Tensor<F>> {
        let x = self.cache.take().ok_or_else(|| {
            Error::State("dense backward called without a preceding train-mode forward".into())
        })?;
        let n = x.len() / self.in_dim;
        debug_assert_eq!(dy.numel(), n * self.out_dim);

        matmul_at_b(&x, dy.data(), self.weight.grad_mut(), n, self.in_dim, self.out_dim);
        {
            let db = self.bias.grad_mut();
            for r in 0..n {
                let dy_row = &dy.data()[r * self.out_dim..(r + 1) * self.out_dim];
                for (g, &v) in db.iter_mut().zip(dy_row) {
                    *g += v;
                }
            }
        }

        let mut w_t = vec![F::zero(); self.out_dim * self.in_dim];
        for k in 0..self.in_dim {
            for c in 0..self.out_dim {
                w_t[c * self.in_dim + k] = self.weight.data()[k * self.out_dim + c];
            }
        }
        let mut dx = vec![F::zero(); n * self.in_dim];
        matmul_acc(dy.data(), &w_t, &mut dx, n, self.out_dim, self.in_dim);
        Tensor::new(&[n, self.in_dim], dx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_count_closed_forms() {
        assert_eq!(LayerSpec::conv3x3(3, 8).param_count(), 3 * 3 * 3 * 8 + 8);
        assert_eq!(LayerSpec::batch_norm(16).param_count(), 32);
        assert_eq!(
            LayerSpec::Dense {
                in_dim: 512,
                out_dim: 10
            }
            .param_count(),
            5130
        );
        assert_eq!(LayerSpec::MaxPool2x2.param_count(), 0);
        assert_eq!(LayerSpec::Relu.param_count(), 0);
        assert_eq!(LayerSpec::Flatten.param_count(), 0);
    }

    #[test]
    fn identity_conv_1x1_unpadded_passes_input_through() {
        // 1x1 conv, weight 1, no bias, pad 0: output equals input.
        let weight = Tensor::new(&[1, 1], vec![1.0f32]).unwrap();
        let bias = Tensor::zeros(&[1]);
        let mut conv = Conv2d::new(1, 1, 1, 1, 0, weight, bias);
        let x = Tensor::new(&[1, 2, 3, 1], vec![0.5, -1.0, 2.0, 3.0, 4.5, -0.25]).unwrap();
        let y = conv.forward(&x, Mode::Eval).unwrap();
        assert_eq!(y.shape(), x.shape());
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn maxpool_takes_window_max() {
        let x = Tensor::new(&[1, 2, 2, 1], vec![1.0f32, 2.0, 3.0, 4.0]).unwrap();
        let mut pool = MaxPool2x2::default();
        let y = pool.forward(&x, Mode::Eval).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.data(), &[4.0]);
    }

    #[test]
    fn batchnorm_train_standardizes_batch() {
        // Two channels with different offsets/scales.
        let mut data = Vec::new();
        for i in 0..8 {
            data.push(3.0 + i as f32); // channel 0
            data.push(-2.0 * i as f32); // channel 1
        }
        let x = Tensor::new(&[2, 2, 2, 2], data).unwrap();
        let mut bn = BatchNorm::<f32>::new(2, 1e-5, 0.1);
        let y = bn.forward(&x, Mode::Train).unwrap();
        for ch in 0..2 {
            let vals: Vec<f32> = y.data().iter().skip(ch).step_by(2).copied().collect();
            let mean: f32 = vals.iter().sum::<f32>() / vals.len() as f32;
            let var: f32 =
                vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / vals.len() as f32;
            assert!(mean.abs() < 1e-5, "channel {ch} mean {mean}");
            assert!((var - 1.0).abs() < 1e-2, "channel {ch} var {var}");
        }
    }

    #[test]
    fn batchnorm_frozen_running_stats_match_train_output() {
        let x = Tensor::new(
            &[1, 2, 2, 2],
            vec![0.1f32, -0.4, 0.9, 2.0, -1.5, 0.3, 0.7, 0.0],
        )
        .unwrap();
        let mut bn = BatchNorm::<f32>::new(2, 1e-5, 1.0);
        // momentum 1 copies the batch statistics into the running buffers...
        let y_train = bn.forward(&x, Mode::Train).unwrap();
        // ...and momentum 0 freezes them there.
        bn.momentum = 0.0;
        let _ = bn.forward(&x, Mode::Train).unwrap();
        let y_eval = bn.forward(&x, Mode::Eval).unwrap();
        for (a, b) in y_train.data().iter().zip(y_eval.data()) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn dense_weight_gradient_is_outer_product() {
        // y = W x for a single sample: dL/dW = x^T g.
        let w = Tensor::new(&[3, 2], vec![0.5f32, -1.0, 2.0, 0.25, -0.75, 1.5]).unwrap();
        let b = Tensor::zeros(&[2]);
        let mut dense = Dense::new(3, 2, w, b);
        let x = Tensor::new(&[1, 3], vec![1.0f32, -2.0, 3.0]).unwrap();
        let _ = dense.forward(&x, Mode::Train).unwrap();
        let g = Tensor::new(&[1, 2], vec![0.5f32, -1.5]).unwrap();
        let _ = dense.backward(&g).unwrap();
        let dw = dense.weight.grad().unwrap();
        let expected = [
            1.0 * 0.5,
            1.0 * -1.5,
            -2.0 * 0.5,
            -2.0 * -1.5,
            3.0 * 0.5,
            3.0 * -1.5,
        ];
        for (a, e) in dw.iter().zip(expected) {
            assert!((a - e).abs() < 1e-6);
        }
    }

    #[test]
    fn backward_before_forward_is_a_state_error() {
        let mut relu = Relu::<f32>::default();
        let dy = Tensor::zeros(&[1, 4]);
        assert!(matches!(
            relu.backward(&dy),
            Err(crate::error::Error::State(_))
        ));
    }
}
