//! Dual-pathway top-N beam predictor.
//!
//! Pathway one runs the resized isolated-transmitter image through a conv
//! stack; pathway two embeds the search-space bits with two dense layers. The
//! concatenation feeds a dense head whose logits are masked to the reduced
//! beam set.

pub mod container;
pub mod gradcheck;
mod train;

pub use container::{load_params, save_params};
pub use train::{train, BeamSample, EpochRecord, TrainConfig, write_history_csv};

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::nn::{
    add_into, check_finite, dense_backward, dense_forward, relu, relu_backward, BlockCache,
    ConvStack, Real, Tensor,
};
use crate::ranking::top_n_desc;
use crate::scene::RgbImage;

/// Additive logit penalty on beams outside the search space.
pub const MASK_PENALTY: f64 = -1e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamNetConfig {
    pub input_size: usize,
    pub conv_widths: Vec<usize>,
    pub bits_hidden: [usize; 2],
    pub head_hidden: [usize; 2],
    pub num_beams: usize,
    /// Second pathway over the search-space bits.
    pub use_search_pathway: bool,
    /// Mask logits outside the search space.
    pub use_mask: bool,
    /// Start the output layer at zero.
    pub zero_init_final: bool,
}

impl Default for BeamNetConfig {
    fn default() -> Self {
        Self {
            input_size: 64,
            conv_widths: vec![16, 32, 64],
            bits_hidden: [32, 32],
            head_hidden: [128, 64],
            num_beams: 64,
            use_search_pathway: true,
            use_mask: true,
            zero_init_final: false,
        }
    }
}

impl BeamNetConfig {
    pub fn stack(&self) -> ConvStack {
        ConvStack {
            in_size: self.input_size,
            in_channels: 3,
            widths: self.conv_widths.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.conv_widths.is_empty() || self.input_size % (1 << self.conv_widths.len()) != 0 {
            return invalid("input size must be divisible by 2^blocks");
        }
        if self.num_beams == 0 {
            return invalid("need at least one beam");
        }
        Ok(())
    }
}

/// Parameters and batch-norm running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamNet<T> {
    pub cfg: BeamNetConfig,
    pub params: Vec<Tensor<T>>,
    pub running: Vec<Tensor<T>>,
}

/// Dense layer indices into `params`, as (weight, bias) pairs.
struct Layout {
    bits: Option<[usize; 2]>,
    head: [usize; 3],
}

/// Intermediates of a training-mode forward pass.
pub struct ForwardCache<T> {
    blocks: Vec<BlockCache<T>>,
    bits_in: Array2<T>,
    bits_act: Vec<Array2<T>>,
    head_in: Array2<T>,
    head_act: Vec<Array2<T>>,
}

impl<T> ForwardCache<T> {
    /// Activation pattern (ReLU signs and pooling winners); the network is
    /// smooth in its parameters while this stays fixed.
    pub fn pattern(&self) -> Vec<u64>
    where
        T: Real,
    {
        let mut out = Vec::new();
        let mut word = 0u64;
        let mut nbits = 0;
        let mut push = |b: bool| {
            word = (word << 1) | b as u64;
            nbits += 1;
            if nbits == 64 {
                out.push(word);
                word = 0;
                nbits = 0;
            }
        };
        for b in &self.blocks {
            b.act.iter().for_each(|v| push(*v > T::zero()));
            b.arg.iter().for_each(|&a| {
                push(a & 1 == 1);
                push(a & 2 == 2);
            });
        }
        for a in self.bits_act.iter().chain(&self.head_act) {
            a.iter().for_each(|v| push(*v > T::zero()));
        }
        push(true);
        out.push(word);
        out
    }
}

impl<T: Real> BeamNet<T> {
    pub fn new(cfg: BeamNetConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stack = cfg.stack();
        let (mut params, running) = stack.init::<T, _>("", &mut rng);
        let mut dense = |name: &str, n_out: usize, n_in: usize, zero: bool, params: &mut Vec<Tensor<T>>| {
            params.push(if zero {
                Tensor::zeros(&format!("{name}.w"), &[n_out, n_in])
            } else {
                Tensor::he(&format!("{name}.w"), &[n_out, n_in], n_in, &mut rng)
            });
            params.push(Tensor::zeros(&format!("{name}.b"), &[n_out]));
        };
        let mut head_in = stack.flat_len();
        if cfg.use_search_pathway {
            dense("bits1", cfg.bits_hidden[0], cfg.num_beams, false, &mut params);
            dense("bits2", cfg.bits_hidden[1], cfg.bits_hidden[0], false, &mut params);
            head_in += cfg.bits_hidden[1];
        }
        dense("head1", cfg.head_hidden[0], head_in, false, &mut params);
        dense("head2", cfg.head_hidden[1], cfg.head_hidden[0], false, &mut params);
        dense("out", cfg.num_beams, cfg.head_hidden[1], cfg.zero_init_final, &mut params);
        Ok(Self { cfg, params, running })
    }

    fn layout(&self) -> Layout {
        let base = 3 * self.cfg.conv_widths.len();
        let (bits, head0) = if self.cfg.use_search_pathway {
            (Some([base, base + 2]), base + 4)
        } else {
            (None, base)
        };
        Layout {
            bits,
            head: [head0, head0 + 2, head0 + 4],
        }
    }

    pub fn num_params(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().chain(&self.running).all(Tensor::all_finite)
            && self.running.iter().skip(1).step_by(2).all(|v| v.data.iter().all(|&x| x > T::zero()))
    }

    pub fn cast<U: Real>(&self) -> BeamNet<U> {
        BeamNet {
            cfg: self.cfg.clone(),
            params: self.params.iter().map(Tensor::cast).collect(),
            running: self.running.iter().map(Tensor::cast).collect(),
        }
    }

    /// Raw logits `[n, num_beams]`. `images` holds `n * input_size^2` RGB rows;
    /// `bits` is `[n, num_beams]` of 0/1.
    pub fn forward(
        &self,
        images: ArrayView2<T>,
        bits: ArrayView2<T>,
        train: bool,
    ) -> Result<(Array2<T>, ForwardCache<T>)> {
        let n = bits.nrows();
        let side = self.cfg.input_size;
        if images.nrows() != n * side * side || images.ncols() != 3 || bits.ncols() != self.cfg.num_beams {
            return invalid("batch shape does not match the network");
        }
        let lay = self.layout();
        let p = &self.params;
        let (feat, blocks) =
            self.cfg
                .stack()
                .forward(p, &self.running, 0, images.to_owned(), n, train, "")?;
        let mut bits_act = Vec::new();
        let head_in = if let Some([b1, b2]) = lay.bits {
            let a1 = relu(checked(dense_forward(bits, p[b1].mat(), p[b1 + 1].vec()), "bits1")?);
            let a2 = relu(checked(dense_forward(a1.view(), p[b2].mat(), p[b2 + 1].vec()), "bits2")?);
            let cat = concatenate(Axis(1), &[feat.view(), a2.view()]).expect("same batch");
            bits_act = vec![a1, a2];
            cat
        } else {
            feat
        };
        let [h1, h2, o] = lay.head;
        let a1 = relu(checked(dense_forward(head_in.view(), p[h1].mat(), p[h1 + 1].vec()), "head1")?);
        let a2 = relu(checked(dense_forward(a1.view(), p[h2].mat(), p[h2 + 1].vec()), "head2")?);
        let logits = checked(dense_forward(a2.view(), p[o].mat(), p[o + 1].vec()), "out")?;
        Ok((
            logits,
            ForwardCache {
                blocks,
                bits_in: bits.to_owned(),
                bits_act,
                head_in,
                head_act: vec![a1, a2],
            },
        ))
    }

    /// Parameter gradients for upstream gradient `dlogits`.
    pub fn backward(&self, cache: &ForwardCache<T>, dlogits: ArrayView2<T>) -> Vec<Vec<T>> {
        let p = &self.params;
        let lay = self.layout();
        let mut grads: Vec<Vec<T>> = p.iter().map(|t| vec![T::zero(); t.len()]).collect();
        let [h1, h2, o] = lay.head;
        let a2 = &cache.head_act[1];
        let a1 = &cache.head_act[0];
        let (dw, db, da2) = dense_backward(dlogits, a2.view(), p[o].mat());
        add_into(&mut grads[o], dw.iter());
        add_into(&mut grads[o + 1], db.iter());
        let dz2 = relu_backward(da2, a2.view());
        let (dw, db, da1) = dense_backward(dz2.view(), a1.view(), p[h2].mat());
        add_into(&mut grads[h2], dw.iter());
        add_into(&mut grads[h2 + 1], db.iter());
        let dz1 = relu_backward(da1, a1.view());
        let (dw, db, dcat) = dense_backward(dz1.view(), cache.head_in.view(), p[h1].mat());
        add_into(&mut grads[h1], dw.iter());
        add_into(&mut grads[h1 + 1], db.iter());

        let flat = self.cfg.stack().flat_len();
        let dfeat = dcat.slice(s![.., ..flat]).to_owned();
        if let Some([b1, b2]) = lay.bits {
            let (ba1, ba2) = (&cache.bits_act[0], &cache.bits_act[1]);
            let dba2 = relu_backward(dcat.slice(s![.., flat..]).to_owned(), ba2.view());
            let (dw, db, dba1) = dense_backward(dba2.view(), ba1.view(), p[b2].mat());
            add_into(&mut grads[b2], dw.iter());
            add_into(&mut grads[b2 + 1], db.iter());
            let dbz1 = relu_backward(dba1, ba1.view());
            let (dw, db, _) = dense_backward(dbz1.view(), cache.bits_in.view(), p[b1].mat());
            add_into(&mut grads[b1], dw.iter());
            add_into(&mut grads[b1 + 1], db.iter());
        }
        self.cfg.stack().backward(p, 0, &cache.blocks, dfeat, &mut grads);
        grads
    }

    pub fn update_running(&mut self, cache: &ForwardCache<T>) {
        let stack = self.cfg.stack();
        stack.update_running(&mut self.running, &cache.blocks);
    }

    /// Masked (when enabled) training loss and its gradient with respect to
    /// the raw logits. Samples whose label lies outside their search space
    /// are trained unmasked.
    pub fn loss(&self, logits: ArrayView2<T>, bits: ArrayView2<T>, targets: &[usize]) -> (T, Array2<T>) {
        let mut masked = logits.to_owned();
        if self.cfg.use_mask {
            for (i, mut row) in masked.outer_iter_mut().enumerate() {
                if bits[[i, targets[i]]] <= T::zero() {
                    continue;
                }
                for (v, &b) in row.iter_mut().zip(bits.row(i).iter()) {
                    if b <= T::zero() {
                        *v = *v + T::of(MASK_PENALTY);
                    }
                }
            }
        }
        crate::nn::softmax_xent(masked.view(), targets)
    }
}

fn checked<T: Real>(x: Array2<T>, layer: &str) -> Result<Array2<T>> {
    check_finite(&x, layer)?;
    Ok(x)
}

/// Replace logits at false bits with the mask penalty added.
pub fn mask_logits(logits: &[f64], bits: &[bool]) -> Result<Vec<f64>> {
    if logits.len() != bits.len() {
        return invalid("logits and bits differ in length");
    }
    if !bits.iter().any(|&b| b) {
        return Err(Error::EmptySearchSpace);
    }
    Ok(logits
        .iter()
        .zip(bits)
        .map(|(&l, &b)| if b { l } else { l + MASK_PENALTY })
        .collect())
}

/// Softmax in f64.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub masked_logits: Vec<f64>,
    pub top_n: Vec<usize>,
    pub n: usize,
}

/// Top-`n` beams among those allowed by `bits`, best first, ties to the lower index.
pub fn top_n_from_logits(masked_logits: &[f64], bits: &[bool], n: usize) -> Vec<usize> {
    top_n_desc(masked_logits, masked_logits.len())
        .into_iter()
        .filter(|&q| bits[q])
        .take(n)
        .collect()
}

/// Resize an image to `side x side` by nearest neighbour; values scaled to [0, 1].
pub fn resize_nearest<T: Real>(image: &RgbImage, side: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(side * side * 3);
    for y in 0..side {
        let sy = ((y as f64 + 0.5) * image.height as f64 / side as f64) as usize;
        for x in 0..side {
            let sx = ((x as f64 + 0.5) * image.width as f64 / side as f64) as usize;
            let p = image.pixel(sx.min(image.width - 1), sy.min(image.height - 1));
            out.extend(p.iter().map(|&v| T::of(v as f64 / 255.0)));
        }
    }
    out
}

/// Stack samples into network batch matrices.
pub fn batch_arrays<T: Real>(images: &[&[T]], bits: &[&[bool]], side: usize) -> (Array2<T>, Array2<T>) {
    let n = images.len();
    let mut img = Vec::with_capacity(n * side * side * 3);
    for im in images {
        img.extend_from_slice(im);
    }
    let q = bits.first().map_or(0, |b| b.len());
    let b: Vec<T> = bits
        .iter()
        .flat_map(|r| r.iter().map(|&v| if v { T::one() } else { T::zero() }))
        .collect();
    (
        Array2::from_shape_vec((n * side * side, 3), img).expect("image batch"),
        Array2::from_shape_vec((n, q), b).expect("bit batch"),
    )
}

impl<T: Real> BeamNet<T> {
    /// Eval-mode predictions for a batch.
    pub fn predict_top_n(&self, images: &[&[T]], bits: &[&[bool]], n: usize) -> Result<Vec<Prediction>> {
        if n == 0 || n > self.cfg.num_beams {
            return invalid("n must lie in 1..=num_beams");
        }
        let (img, b) = batch_arrays(images, bits, self.cfg.input_size);
        let (logits, _) = self.forward(img.view(), b.view(), false)?;
        logits
            .outer_iter()
            .zip(bits)
            .map(|(row, &bt)| {
                let raw: Vec<f64> = row.iter().map(|v| v.to_f64().unwrap()).collect();
                let (masked, allowed) = if self.cfg.use_mask {
                    (mask_logits(&raw, bt)?, bt.to_vec())
                } else {
                    (raw, vec![true; bt.len()])
                };
                let top_n = top_n_from_logits(&masked, &allowed, n);
                Ok(Prediction {
                    masked_logits: masked,
                    top_n,
                    n,
                })
            })
            .collect()
    }
}

/// Fraction of frames whose oracle beam is among the first `n` predicted beams.
pub fn top_n_accuracy(predictions: &[Vec<usize>], oracle: &[usize], n: usize) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != oracle.len() {
        return invalid("predictions and oracle beams must be aligned and non-empty");
    }
    let hits = predictions
        .iter()
        .zip(oracle)
        .filter(|(p, &o)| p.iter().take(n).any(|&q| q == o))
        .count();
    Ok(hits as f64 / predictions.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn tiny_cfg() -> BeamNetConfig {
        BeamNetConfig {
            input_size: 16,
            conv_widths: vec![4, 6, 8],
            bits_hidden: [8, 8],
            head_hidden: [12, 10],
            num_beams: 8,
            ..Default::default()
        }
    }

    #[test]
    fn zero_everything_gives_zero_logits() {
        let cfg = BeamNetConfig {
            zero_init_final: true,
            ..Default::default()
        };
        let net = BeamNet::<f64>::new(cfg, 3).unwrap();
        let img = vec![0.0; 64 * 64 * 3];
        let bits = vec![false; 64];
        let (i, b) = batch_arrays(&[&img[..]], &[&bits[..]], 64);
        let (logits, _) = net.forward(i.view(), b.view(), false).unwrap();
        assert!(logits.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn duplicated_inputs_give_identical_rows() {
        let net = BeamNet::<f32>::new(tiny_cfg(), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let img: Vec<f32> = (0..16 * 16 * 3).map(|_| rng.gen()).collect();
        let other: Vec<f32> = (0..16 * 16 * 3).map(|_| rng.gen()).collect();
        let bits = vec![true, false, true, true, false, false, true, false];
        let (i, b) = batch_arrays(&[&img[..], &other[..], &img[..]], &[&bits[..]; 3], 16);
        let (logits, _) = net.forward(i.view(), b.view(), false).unwrap();
        assert_eq!(logits.row(0), logits.row(2));
    }

    /// Straight-line reference evaluation of the eval-mode network.
    fn reference_logits(net: &BeamNet<f64>, img: &[f64], bits: &[bool]) -> Vec<f64> {
        let cfg = &net.cfg;
        let mut side = cfg.input_size;
        let mut c_in = 3;
        let mut x: Vec<f64> = img.to_vec();
        for (b, &c) in cfg.conv_widths.iter().enumerate() {
            let w = &net.params[3 * b].data;
            let g = &net.params[3 * b + 1].data;
            let be = &net.params[3 * b + 2].data;
            let rm = &net.running[2 * b].data;
            let rv = &net.running[2 * b + 1].data;
            let mut y = vec![0.0; side * side * c];
            for yy in 0..side {
                for xx in 0..side {
                    for o in 0..c {
                        let mut acc = 0.0;
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let sy = yy as i64 + ky - 1;
                                let sx = xx as i64 + kx - 1;
                                if sy < 0 || sx < 0 || sy >= side as i64 || sx >= side as i64 {
                                    continue;
                                }
                                for ci in 0..c_in {
                                    acc += x[(sy as usize * side + sx as usize) * c_in + ci]
                                        * w[o * 9 * c_in + ((ky * 3 + kx) as usize) * c_in + ci];
                                }
                            }
                        }
                        let v = g[o] * (acc - rm[o]) / (rv[o] + 1e-5).sqrt() + be[o];
                        y[(yy * side + xx) * c + o] = v.max(0.0);
                    }
                }
            }
            let half = side / 2;
            let mut pooled = vec![0.0; half * half * c];
            for yy in 0..half {
                for xx in 0..half {
                    for o in 0..c {
                        let mut m = f64::NEG_INFINITY;
                        for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                            m = m.max(y[((2 * yy + dy) * side + 2 * xx + dx) * c + o]);
                        }
                        pooled[(yy * half + xx) * c + o] = m;
                    }
                }
            }
            x = pooled;
            side = half;
            c_in = c;
        }
        let dense = |x: &[f64], w: &Tensor<f64>, b: &Tensor<f64>, act: bool| -> Vec<f64> {
            let (o, i) = (w.shape[0], w.shape[1]);
            (0..o)
                .map(|r| {
                    let v: f64 = (0..i).map(|k| w.data[r * i + k] * x[k]).sum::<f64>() + b.data[r];
                    if act { v.max(0.0) } else { v }
                })
                .collect()
        };
        let base = 3 * cfg.conv_widths.len();
        let p = &net.params;
        let bv: Vec<f64> = bits.iter().map(|&b| b as u8 as f64).collect();
        let e1 = dense(&bv, &p[base], &p[base + 1], true);
        let e2 = dense(&e1, &p[base + 2], &p[base + 3], true);
        x.extend(e2);
        let h1 = dense(&x, &p[base + 4], &p[base + 5], true);
        let h2 = dense(&h1, &p[base + 6], &p[base + 7], true);
        dense(&h2, &p[base + 8], &p[base + 9], false)
    }

    #[test]
    fn forward_matches_reference() {
        let mut net = BeamNet::<f64>::new(tiny_cfg(), 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for t in net.running.iter_mut() {
            for v in t.data.iter_mut() {
                *v = rng.gen_range(0.2..1.5);
            }
        }
        for t in net.params.iter_mut().filter(|t| t.name.ends_with(".b") || t.name.contains("bn")) {
            for v in t.data.iter_mut() {
                *v = rng.gen_range(-0.3..0.3);
            }
        }
        let img: Vec<f64> = (0..16 * 16 * 3).map(|_| rng.gen()).collect();
        let bits = vec![true, true, false, true, false, true, false, false];
        let (i, b) = batch_arrays(&[&img[..]], &[&bits[..]], 16);
        let (logits, _) = net.forward(i.view(), b.view(), false).unwrap();
        let want = reference_logits(&net, &img, &bits);
        for (a, w) in logits.row(0).iter().zip(&want) {
            assert!((a - w).abs() < 1e-10, "{a} vs {w}");
        }
    }

    #[test]
    fn non_finite_input_reports_layer() {
        let net = BeamNet::<f64>::new(tiny_cfg(), 1).unwrap();
        let mut img = vec![0.1; 16 * 16 * 3];
        img[5] = f64::NAN;
        let bits = vec![true; 8];
        let (i, b) = batch_arrays(&[&img[..]], &[&bits[..]], 16);
        match net.forward(i.view(), b.view(), false) {
            Err(Error::NumericFailure { layer }) => assert_eq!(layer, "block1"),
            other => panic!("unexpected {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn mask_cases() {
        let l = vec![0.3, -1.0, 2.0, 0.5];
        assert_eq!(mask_logits(&l, &[true; 4]).unwrap(), l);
        let m = mask_logits(&[50.0, 1.0, 99.0, 3.0], &[false, true, false, false]).unwrap();
        assert_eq!(top_n_from_logits(&m, &[false, true, false, false], 3), vec![1]);
        assert!(matches!(mask_logits(&l, &[false; 4]), Err(Error::EmptySearchSpace)));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let l: Vec<f64> = (0..64).map(|_| rng.gen_range(-20.0..20.0)).collect();
            let mut bits: Vec<bool> = (0..64).map(|_| rng.gen_bool(0.1)).collect();
            bits[rng.gen_range(0..64)] = true;
            let p = softmax(&mask_logits(&l, &bits).unwrap());
            let off: f64 = p.iter().zip(&bits).filter(|(_, &b)| !b).map(|(v, _)| v).sum();
            assert!(off < 1e-300);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn top_n_rules() {
        let l: Vec<f64> = (0..64).map(|i| (i % 7) as f64).collect();
        let all = vec![true; 64];
        let mut t = top_n_from_logits(&l, &all, 64);
        t.sort();
        assert_eq!(t, (0..64).collect::<Vec<_>>());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let l: Vec<f64> = (0..64).map(|_| rng.gen_range(0..10) as f64).collect();
        let mut idx: Vec<usize> = (0..64).collect();
        idx.sort_by(|&a, &b| l[b].total_cmp(&l[a]).then(a.cmp(&b)));
        assert_eq!(top_n_from_logits(&l, &all, 5), idx[..5].to_vec());
    }

    #[test]
    fn accuracy_cases() {
        let preds = vec![vec![3, 1, 2], vec![0, 5, 6]];
        assert_eq!(top_n_accuracy(&preds, &[3, 0], 1).unwrap(), 1.0);
        assert_eq!(top_n_accuracy(&preds, &[9, 9], 3).unwrap(), 0.0);
        assert_eq!(top_n_accuracy(&preds, &[2, 6], 1).unwrap(), 0.0);
        assert_eq!(top_n_accuracy(&preds, &[2, 6], 3).unwrap(), 1.0);
        assert!(top_n_accuracy(&[], &[], 1).is_err());
        // Random rankings: top-5 accuracy near 5/64.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let mut preds = Vec::new();
        let mut oracle = Vec::new();
        for _ in 0..n {
            let mut p: Vec<usize> = (0..64).collect();
            rand::seq::SliceRandom::shuffle(&mut p[..], &mut rng);
            preds.push(p);
            oracle.push(rng.gen_range(0..64));
        }
        let acc = top_n_accuracy(&preds, &oracle, 5).unwrap();
        let pr = 5.0 / 64.0;
        let sd = (pr * (1.0 - pr) / n as f64).sqrt();
        assert!((acc - pr).abs() < 3.0 * sd);
    }

    #[test]
    fn resize_samples_centers() {
        let mut img = RgbImage::filled(320, 240, [0, 0, 0]);
        img.set_pixel(2, 1, [255, 0, 0]);
        let r: Vec<f64> = resize_nearest(&img, 64);
        // Output cell (0, 0) samples source pixel (2, 1).
        assert_eq!(&r[..3], &[1.0, 0.0, 0.0]);
    }
}
