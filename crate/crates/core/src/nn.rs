//! Minimal layer library with hand-written backward passes.
//!
//! Activations are `[rows, channels]` matrices; for image tensors the rows are
//! `(sample, y, x)` in row-major order (NHWC). Convolutions lower to one GEMM
//! through im2col.

use std::fmt::{Debug, Display};

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub trait Real:
    Float + FromPrimitive + LinalgScalar + ScalarOperand + Debug + Display + Default + Send + Sync + 'static
{
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Named dense tensor with row-major storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(name: &str, shape: &[usize]) -> Self {
        Self::filled(name, shape, T::zero())
    }

    pub fn filled(name: &str, shape: &[usize], v: T) -> Self {
        Self {
            name: name.to_string(),
            shape: shape.to_vec(),
            data: vec![v; shape.iter().product()],
        }
    }

    /// He-normal initialisation with the given fan-in.
    pub fn he<R: Rng + ?Sized>(name: &str, shape: &[usize], fan_in: usize, rng: &mut R) -> Self {
        let std = (2.0 / fan_in as f64).sqrt();
        let data = (0..shape.iter().product::<usize>())
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                T::of(z * std)
            })
            .collect();
        Self {
            name: name.to_string(),
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn mat(&self) -> ArrayView2<'_, T> {
        let cols = *self.shape.last().unwrap_or(&1);
        ArrayView2::from_shape((self.data.len() / cols.max(1), cols), &self.data).expect("shape")
    }

    pub fn vec(&self) -> ArrayView1<'_, T> {
        ArrayView1::from(&self.data[..])
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            name: self.name.clone(),
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::of(v.to_f64().unwrap())).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Spatial layout of an image activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape4 {
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

impl Shape4 {
    pub fn rows(&self) -> usize {
        self.n * self.h * self.w
    }
}

/// 3x3, stride 1, zero-padded patches; column order `(ky, kx, channel)`.
pub fn im2col<T: Real>(x: ArrayView2<T>, s: Shape4) -> Array2<T> {
    let mut cols = Array2::zeros((s.rows(), 9 * s.c));
    let xs = x.as_slice().expect("contiguous activations");
    let out = cols.as_slice_mut().expect("contiguous");
    for n in 0..s.n {
        for y in 0..s.h {
            for xx in 0..s.w {
                let row = (n * s.h + y) * s.w + xx;
                let dst = &mut out[row * 9 * s.c..(row + 1) * 9 * s.c];
                for ky in 0..3 {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= s.h as isize {
                        continue;
                    }
                    for kx in 0..3 {
                        let sx = xx as isize + kx as isize - 1;
                        if sx < 0 || sx >= s.w as isize {
                            continue;
                        }
                        let src = ((n * s.h + sy as usize) * s.w + sx as usize) * s.c;
                        let k = (ky * 3 + kx) * s.c;
                        dst[k..k + s.c].copy_from_slice(&xs[src..src + s.c]);
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`].
pub fn col2im<T: Real>(d: ArrayView2<T>, s: Shape4) -> Array2<T> {
    let mut dx = Array2::zeros((s.rows(), s.c));
    let ds = d.as_slice().expect("contiguous");
    let out = dx.as_slice_mut().expect("contiguous");
    for n in 0..s.n {
        for y in 0..s.h {
            for xx in 0..s.w {
                let row = (n * s.h + y) * s.w + xx;
                let src = &ds[row * 9 * s.c..(row + 1) * 9 * s.c];
                for ky in 0..3 {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= s.h as isize {
                        continue;
                    }
                    for kx in 0..3 {
                        let sx = xx as isize + kx as isize - 1;
                        if sx < 0 || sx >= s.w as isize {
                            continue;
                        }
                        let dst = ((n * s.h + sy as usize) * s.w + sx as usize) * s.c;
                        let k = (ky * 3 + kx) * s.c;
                        for c in 0..s.c {
                            out[dst + c] = out[dst + c] + src[k + c];
                        }
                    }
                }
            }
        }
    }
    dx
}

/// Convolution with weights `[c_out, 9 * c_in]`; returns output and patches.
pub fn conv3x3_forward<T: Real>(x: ArrayView2<T>, s: Shape4, w: ArrayView2<T>) -> (Array2<T>, Array2<T>) {
    let cols = im2col(x, s);
    let y = cols.dot(&w.t());
    (y, cols)
}

/// Returns `(dW, dX)`; `dX` is skipped when not needed (first layer).
pub fn conv3x3_backward<T: Real>(
    dy: ArrayView2<T>,
    cols: ArrayView2<T>,
    w: ArrayView2<T>,
    s: Shape4,
    need_dx: bool,
) -> (Array2<T>, Option<Array2<T>>) {
    let dw = dy.t().dot(&cols);
    let dx = need_dx.then(|| col2im(dy.dot(&w).view(), s));
    (dw, dx)
}

pub struct BnCache<T> {
    pub xhat: Array2<T>,
    pub inv_std: Array1<T>,
    pub mean: Array1<T>,
    /// Unbiased batch variance, used for the running estimate.
    pub var_unbiased: Array1<T>,
}

pub fn bn_forward_train<T: Real>(
    x: ArrayView2<T>,
    gamma: ArrayView1<T>,
    beta: ArrayView1<T>,
) -> (Array2<T>, BnCache<T>) {
    let m = x.nrows();
    let mf = T::of(m as f64);
    let mean = x.mean_axis(Axis(0)).expect("non-empty batch");
    let centered = &x - &mean;
    let var = centered.mapv(|v| v * v).sum_axis(Axis(0)) / mf;
    let inv_std = var.mapv(|v| T::one() / (v + T::of(BN_EPS)).sqrt());
    let xhat = &centered * &inv_std;
    let y = &xhat * &gamma + &beta;
    let var_unbiased = if m > 1 {
        &var * (mf / T::of((m - 1) as f64))
    } else {
        var
    };
    (
        y,
        BnCache {
            xhat,
            inv_std,
            mean,
            var_unbiased,
        },
    )
}

pub fn bn_forward_eval<T: Real>(
    x: ArrayView2<T>,
    gamma: ArrayView1<T>,
    beta: ArrayView1<T>,
    mean: ArrayView1<T>,
    var: ArrayView1<T>,
) -> Array2<T> {
    let scale = Array1::from_iter(
        gamma
            .iter()
            .zip(var.iter())
            .map(|(&g, &v)| g / (v + T::of(BN_EPS)).sqrt()),
    );
    let shift = &beta - &(&mean * &scale);
    &x * &scale + &shift
}

/// Returns `(dx, dgamma, dbeta)`.
pub fn bn_backward<T: Real>(
    dy: ArrayView2<T>,
    cache: &BnCache<T>,
    gamma: ArrayView1<T>,
) -> (Array2<T>, Array1<T>, Array1<T>) {
    let mf = T::of(dy.nrows() as f64);
    let dbeta = dy.sum_axis(Axis(0));
    let dgamma = (&dy * &cache.xhat).sum_axis(Axis(0));
    let k = &gamma * &cache.inv_std / mf;
    let dx = (&dy * mf - &dbeta - &(&cache.xhat * &dgamma)) * &k;
    (dx, dgamma, dbeta)
}

/// Blend batch statistics into the running estimates.
pub fn bn_update_running<T: Real>(running_mean: &mut [T], running_var: &mut [T], cache: &BnCache<T>) {
    let m = T::of(BN_MOMENTUM);
    for (r, &b) in running_mean.iter_mut().zip(cache.mean.iter()) {
        *r = (T::one() - m) * *r + m * b;
    }
    for (r, &b) in running_var.iter_mut().zip(cache.var_unbiased.iter()) {
        *r = (T::one() - m) * *r + m * b;
    }
}

pub fn relu<T: Real>(mut x: Array2<T>) -> Array2<T> {
    x.mapv_inplace(|v| if v > T::zero() { v } else { T::zero() });
    x
}

/// Backward through ReLU given the forward output `y`.
pub fn relu_backward<T: Real>(mut dy: Array2<T>, y: ArrayView2<T>) -> Array2<T> {
    ndarray::Zip::from(&mut dy).and(&y).for_each(|d, &v| {
        if v <= T::zero() {
            *d = T::zero();
        }
    });
    dy
}

/// 2x2 stride-2 max pooling; returns the output and the winning input row per output entry.
pub fn maxpool2_forward<T: Real>(x: ArrayView2<T>, s: Shape4) -> (Array2<T>, Vec<u32>) {
    let (ho, wo) = (s.h / 2, s.w / 2);
    let rows = s.n * ho * wo;
    let mut y = Array2::zeros((rows, s.c));
    let mut arg = vec![0u32; rows * s.c];
    let xs = x.as_slice().expect("contiguous");
    let ys = y.as_slice_mut().expect("contiguous");
    for n in 0..s.n {
        for oy in 0..ho {
            for ox in 0..wo {
                let orow = (n * ho + oy) * wo + ox;
                let base = (n * s.h + 2 * oy) * s.w + 2 * ox;
                let cand = [base, base + 1, base + s.w, base + s.w + 1];
                for c in 0..s.c {
                    let mut best = cand[0];
                    for &r in &cand[1..] {
                        if xs[r * s.c + c] > xs[best * s.c + c] {
                            best = r;
                        }
                    }
                    ys[orow * s.c + c] = xs[best * s.c + c];
                    arg[orow * s.c + c] = best as u32;
                }
            }
        }
    }
    (y, arg)
}

pub fn maxpool2_backward<T: Real>(dy: ArrayView2<T>, arg: &[u32], s: Shape4) -> Array2<T> {
    let mut dx = Array2::zeros((s.rows(), s.c));
    let c = s.c;
    let dys = dy.as_slice().expect("contiguous");
    let out = dx.as_slice_mut().expect("contiguous");
    for (i, &r) in arg.iter().enumerate() {
        let idx = r as usize * c + i % c;
        out[idx] = out[idx] + dys[i];
    }
    dx
}

/// `y = x W^T + b` with `W: [out, in]`.
pub fn dense_forward<T: Real>(x: ArrayView2<T>, w: ArrayView2<T>, b: ArrayView1<T>) -> Array2<T> {
    x.dot(&w.t()) + &b
}

/// Returns `(dW, db, dx)`.
pub fn dense_backward<T: Real>(
    dy: ArrayView2<T>,
    x: ArrayView2<T>,
    w: ArrayView2<T>,
) -> (Array2<T>, Array1<T>, Array2<T>) {
    (dy.t().dot(&x), dy.sum_axis(Axis(0)), dy.dot(&w))
}

/// Mean cross-entropy over rows and its gradient with respect to the logits.
pub fn softmax_xent<T: Real>(logits: ArrayView2<T>, targets: &[usize]) -> (T, Array2<T>) {
    let n = logits.nrows();
    let mut grad = Array2::zeros(logits.raw_dim());
    let mut total = T::zero();
    for (i, row) in logits.outer_iter().enumerate() {
        let (amax, max) = row
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |b, (j, &v)| if v > b.1 { (j, v) } else { b });
        // Sum the non-maximal terms separately so ln_1p keeps tiny tails exact.
        let rest = row
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != amax)
            .map(|(_, &v)| (v - max).exp())
            .fold(T::zero(), |a, b| a + b);
        let log_sum = rest.ln_1p();
        let lse = max + log_sum;
        total = total + (max - row[targets[i]]) + log_sum;
        let mut g = grad.slice_mut(s![i, ..]);
        for (gj, &v) in g.iter_mut().zip(row.iter()) {
            *gj = (v - lse).exp() / T::of(n as f64);
        }
        g[targets[i]] = g[targets[i]] - T::one() / T::of(n as f64);
    }
    (total / T::of(n as f64), grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates for a list of tensors.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub cfg: AdamConfig,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub t: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(params: &[Tensor<T>], cfg: AdamConfig) -> Self {
        Self {
            cfg,
            m: params.iter().map(|p| vec![T::zero(); p.len()]).collect(),
            v: params.iter().map(|p| vec![T::zero(); p.len()]).collect(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update; increments the step counter first.
pub fn adam_step<T: Real>(params: &mut [Tensor<T>], grads: &[Vec<T>], state: &mut AdamState<T>, lr: f64) -> Result<()> {
    if grads.len() != params.len() {
        return invalid("gradient list does not match parameters");
    }
    state.t += 1;
    let c = state.cfg;
    let bc1 = 1.0 - c.beta1.powi(state.t as i32);
    let bc2 = 1.0 - c.beta2.powi(state.t as i32);
    let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
    let (lr, eps) = (T::of(lr), T::of(c.eps));
    let (bc1, bc2) = (T::of(bc1), T::of(bc2));
    for (i, p) in params.iter_mut().enumerate() {
        if grads[i].len() != p.len() {
            return invalid(format!("gradient size mismatch for {}", p.name));
        }
        for j in 0..p.len() {
            let g = grads[i][j];
            let m = b1 * state.m[i][j] + (T::one() - b1) * g;
            let v = b2 * state.v[i][j] + (T::one() - b2) * g * g;
            state.m[i][j] = m;
            state.v[i][j] = v;
            let mhat = m / bc1;
            let vhat = v / bc2;
            p.data[j] = p.data[j] - lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Cached intermediates of one conv block for the backward pass.
pub struct BlockCache<T> {
    pub shape: Shape4,
    pub cols: Array2<T>,
    pub bn: Option<BnCache<T>>,
    /// ReLU output before pooling.
    pub act: Array2<T>,
    pub arg: Vec<u32>,
}

/// Stack of (conv 3x3 -> batch norm -> ReLU -> 2x2 max pool) blocks.
///
/// Parameters live at `params[first + 3 b ..]` as (conv weight, gamma, beta);
/// running statistics at `running[2 b]` (mean) and `running[2 b + 1]` (variance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvStack {
    pub in_size: usize,
    pub in_channels: usize,
    pub widths: Vec<usize>,
}

impl ConvStack {
    pub fn out_size(&self) -> usize {
        self.in_size >> self.widths.len()
    }

    pub fn flat_len(&self) -> usize {
        self.out_size() * self.out_size() * self.widths.last().copied().unwrap_or(self.in_channels)
    }

    pub fn init<T: Real, R: Rng + ?Sized>(&self, prefix: &str, rng: &mut R) -> (Vec<Tensor<T>>, Vec<Tensor<T>>) {
        let mut params = Vec::new();
        let mut running = Vec::new();
        let mut c_in = self.in_channels;
        for (b, &c) in self.widths.iter().enumerate() {
            let k = b + 1;
            params.push(Tensor::he(&format!("{prefix}conv{k}.w"), &[c, 9 * c_in], 9 * c_in, rng));
            params.push(Tensor::filled(&format!("{prefix}bn{k}.gamma"), &[c], T::one()));
            params.push(Tensor::zeros(&format!("{prefix}bn{k}.beta"), &[c]));
            running.push(Tensor::zeros(&format!("{prefix}bn{k}.running_mean"), &[c]));
            running.push(Tensor::filled(&format!("{prefix}bn{k}.running_var"), &[c], T::one()));
            c_in = c;
        }
        (params, running)
    }

    /// Input rows are `n * in_size * in_size` pixels of `in_channels` values.
    /// Returns `[n, flat_len]` features.
    pub fn forward<T: Real>(
        &self,
        params: &[Tensor<T>],
        running: &[Tensor<T>],
        first: usize,
        input: Array2<T>,
        n: usize,
        train: bool,
        prefix: &str,
    ) -> Result<(Array2<T>, Vec<BlockCache<T>>)> {
        let mut x = input;
        let mut s = Shape4 {
            n,
            h: self.in_size,
            w: self.in_size,
            c: self.in_channels,
        };
        let mut caches = Vec::with_capacity(self.widths.len());
        for (b, &c) in self.widths.iter().enumerate() {
            let p = first + 3 * b;
            let (z, cols) = conv3x3_forward(x.view(), s, params[p].mat());
            let (zb, bn) = if train {
                let (y, cache) = bn_forward_train(z.view(), params[p + 1].vec(), params[p + 2].vec());
                (y, Some(cache))
            } else {
                let y = bn_forward_eval(
                    z.view(),
                    params[p + 1].vec(),
                    params[p + 2].vec(),
                    running[2 * b].vec(),
                    running[2 * b + 1].vec(),
                );
                (y, None)
            };
            // Checked before the ReLU, which would map NaN to zero.
            check_finite(&zb, &format!("{prefix}block{}", b + 1))?;
            let act = relu(zb);
            let out_shape = Shape4 { c, ..s };
            let (pooled, arg) = maxpool2_forward(act.view(), out_shape);
            caches.push(BlockCache {
                shape: out_shape,
                cols,
                bn,
                act,
                arg,
            });
            x = pooled;
            s = Shape4 {
                n,
                h: s.h / 2,
                w: s.w / 2,
                c,
            };
        }
        let flat = x
            .into_shape_with_order((n, self.flat_len()))
            .expect("contiguous pooled output");
        Ok((flat, caches))
    }

    /// Accumulates parameter gradients into `grads` (aligned with `params`).
    pub fn backward<T: Real>(
        &self,
        params: &[Tensor<T>],
        first: usize,
        caches: &[BlockCache<T>],
        dflat: Array2<T>,
        grads: &mut [Vec<T>],
    ) {
        let last = caches.last().expect("at least one block");
        let rows = last.shape.n * (last.shape.h / 2) * (last.shape.w / 2);
        let mut d = dflat
            .into_shape_with_order((rows, last.shape.c))
            .expect("contiguous gradient");
        for b in (0..caches.len()).rev() {
            let cache = &caches[b];
            let p = first + 3 * b;
            let dact = maxpool2_backward(d.view(), &cache.arg, cache.shape);
            let dz = relu_backward(dact, cache.act.view());
            let bn = cache.bn.as_ref().expect("backward needs a training-mode forward");
            let (dzc, dgamma, dbeta) = bn_backward(dz.view(), bn, params[p + 1].vec());
            let in_shape = Shape4 {
                c: if b == 0 { self.in_channels } else { self.widths[b - 1] },
                ..cache.shape
            };
            let (dw, dx) = conv3x3_backward(dzc.view(), cache.cols.view(), params[p].mat(), in_shape, b > 0);
            add_into(&mut grads[p], dw.iter());
            add_into(&mut grads[p + 1], dgamma.iter());
            add_into(&mut grads[p + 2], dbeta.iter());
            if let Some(dx) = dx {
                d = dx;
            }
        }
    }

    /// Fold the cached batch statistics into the running estimates.
    pub fn update_running<T: Real>(&self, running: &mut [Tensor<T>], caches: &[BlockCache<T>]) {
        for (b, cache) in caches.iter().enumerate() {
            if let Some(bn) = &cache.bn {
                let (m, v) = running.split_at_mut(2 * b + 1);
                bn_update_running(&mut m[2 * b].data, &mut v[0].data, bn);
            }
        }
    }
}

pub(crate) fn add_into<'a, T: Real>(dst: &mut [T], src: impl Iterator<Item = &'a T>) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = *d + s;
    }
}

pub(crate) fn check_finite<T: Real>(x: &Array2<T>, layer: &str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(crate::error::Error::NumericFailure {
            layer: layer.to_string(),
        })
    }
}
