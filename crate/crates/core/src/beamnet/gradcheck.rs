//! Central finite-difference check of the hand-written backward pass.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{batch_arrays, BeamNet, BeamNetConfig};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub checked: usize,
    /// Entries skipped because the perturbation flipped a ReLU or pooling decision.
    pub skipped: usize,
    pub max_rel_err: f64,
}

/// Relative error with a floor so that two near-zero values compare as equal.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Compare analytic and numeric gradients on `entries` random coordinates of
/// every parameter tensor of a freshly initialised f64 network.
///
/// The loss is piecewise smooth; coordinates whose `+-eps` perturbation
/// changes the activation pattern straddle a kink and are resampled.
pub fn gradient_check(cfg: BeamNetConfig, seed: u64, entries: usize, eps: f64) -> Result<Vec<TensorCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = BeamNet::<f64>::new(cfg, seed)?;
    // Move batch-norm affine terms and biases off their defaults so every
    // parameter group carries a generic gradient.
    for t in net.params.iter_mut() {
        if t.name.ends_with(".b") || t.name.contains(".beta") || t.name.contains(".gamma") {
            let base = if t.name.contains(".gamma") { 1.0 } else { 0.0 };
            for v in t.data.iter_mut() {
                *v = base + rng.gen_range(-0.2..0.2);
            }
        }
    }
    let side = net.cfg.input_size;
    let q = net.cfg.num_beams;
    let n = 2;
    let mut images = Vec::new();
    let mut bits = Vec::new();
    let mut targets = Vec::new();
    for _ in 0..n {
        // Mostly-zero image with one textured block, like an isolated transmitter.
        let mut img = vec![0.0f64; side * side * 3];
        let (bw, bh) = (rng.gen_range(side / 8..side / 3), rng.gen_range(side / 8..side / 4));
        let (x0, y0) = (rng.gen_range(0..side - bw), rng.gen_range(0..side - bh));
        for y in y0..y0 + bh {
            for x in x0..x0 + bw {
                for c in 0..3 {
                    img[(y * side + x) * 3 + c] = rng.gen_range(0.1..1.0);
                }
            }
        }
        images.push(img);
        let lo = rng.gen_range(0..q - 4);
        let b: Vec<bool> = (0..q).map(|i| i >= lo && i < lo + 4 || rng.gen_bool(0.05)).collect();
        targets.push(lo + rng.gen_range(0..4));
        bits.push(b);
    }
    let img_refs: Vec<&[f64]> = images.iter().map(|v| &v[..]).collect();
    let bit_refs: Vec<&[bool]> = bits.iter().map(|v| &v[..]).collect();
    let (x, b) = batch_arrays(&img_refs, &bit_refs, side);

    let eval = |net: &BeamNet<f64>| -> Result<(f64, Vec<u64>)> {
        let (logits, cache) = net.forward(x.view(), b.view(), true)?;
        Ok((net.loss(logits.view(), b.view(), &targets).0, cache.pattern()))
    };
    let (logits, cache) = net.forward(x.view(), b.view(), true)?;
    let (_, dlogits): (f64, Array2<f64>) = net.loss(logits.view(), b.view(), &targets);
    let grads = net.backward(&cache, dlogits.view());
    let base_pattern = cache.pattern();

    let mut report = Vec::new();
    for ti in 0..net.params.len() {
        let len = net.params[ti].len();
        let mut check = TensorCheck {
            name: net.params[ti].name.clone(),
            checked: 0,
            skipped: 0,
            max_rel_err: 0.0,
        };
        let mut attempts = 0;
        while check.checked < entries.min(len) && attempts < 50 * entries {
            attempts += 1;
            let j = rng.gen_range(0..len);
            let orig = net.params[ti].data[j];
            net.params[ti].data[j] = orig + eps;
            let (lp, pp) = eval(&net)?;
            net.params[ti].data[j] = orig - eps;
            let (lm, pm) = eval(&net)?;
            net.params[ti].data[j] = orig;
            if pp != base_pattern || pm != base_pattern {
                check.skipped += 1;
                continue;
            }
            let numeric = (lp - lm) / (2.0 * eps);
            check.max_rel_err = check.max_rel_err.max(rel_err(grads[ti][j], numeric));
            check.checked += 1;
        }
        report.push(check);
    }
    Ok(report)
}
