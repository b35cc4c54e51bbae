use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bbox::BBox;
use crate::beamnet::container::{fill_slots, read_container, write_container};
use crate::error::{invalid, Result};
use crate::fusion::FusedImage;
use crate::nn::{
    adam_step, add_into, check_finite, dense_backward, dense_forward, softmax_xent, AdamConfig, AdamState,
    ConvStack, Tensor,
};

const ID_MAGIC: &[u8; 8] = b"BSIDM\0\0\0";

/// Nearest-neighbour resample of the three fused planes to a `side x side`
/// crop, interleaved per pixel and scaled to [0, 1].
///
/// The window is `bbox` widened by `context` box widths on each side; samples
/// outside the image read as zero. Boxes right of the image centre are
/// mirrored so the centre always lies to the crop's right. With a pitched
/// camera the transmitter's power column drifts toward the centre, so this
/// keeps the drift on one side.
pub fn crop_fused(fused: &FusedImage, bbox: &BBox, side: usize, context: f64) -> Vec<f32> {
    let mut out = vec![0.0f32; side * side * 3];
    let (cols, rows) = bbox.pixel_ranges(fused.width, fused.height);
    if cols.is_empty() || rows.is_empty() || side == 0 {
        return out;
    }
    let pad = context * cols.len() as f64;
    let x0 = cols.start as f64 - pad;
    let span = cols.len() as f64 + 2.0 * pad;
    let mirror = bbox.x + bbox.w / 2.0 > fused.width as f64 / 2.0;
    for y in 0..side {
        let sy = rows.start + y * rows.len() / side;
        for x in 0..side {
            let xi = if mirror { side - 1 - x } else { x };
            let sx = (x0 + (xi as f64 + 0.5) * span / side as f64).floor();
            if sx < 0.0 || sx >= fused.width as f64 {
                continue;
            }
            let i = sy * fused.width + sx as usize;
            for c in 0..3 {
                out[(y * side + x) * 3 + c] = fused.planes[c][i] as f32 / 255.0;
            }
        }
    }
    out
}

/// Transmitter-vs-distractor scorer over fused crops: a small conv stack
/// followed by a two-way dense classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct IdModel {
    pub crop_size: usize,
    /// Horizontal context per side, in box widths.
    pub context: f64,
    pub stack: ConvStack,
    pub params: Vec<Tensor<f32>>,
    pub running: Vec<Tensor<f32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdTrainConfig {
    pub crop_size: usize,
    /// Horizontal context per side, in box widths.
    pub context: f64,
    pub conv_widths: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for IdTrainConfig {
    fn default() -> Self {
        Self {
            crop_size: 16,
            context: 1.0,
            conv_widths: vec![4, 8, 8],
            epochs: 8,
            batch_size: 32,
            lr: 3e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdSample {
    pub crop: Vec<f32>,
    pub is_tx: bool,
}

impl IdModel {
    pub fn new(cfg: &IdTrainConfig) -> Result<Self> {
        if !(cfg.context >= 0.0 && cfg.context.is_finite()) {
            return invalid("crop context must be non-negative");
        }
        if cfg.crop_size == 0 || cfg.conv_widths.is_empty() || cfg.crop_size >> cfg.conv_widths.len() == 0 {
            return invalid("crop size too small for the conv stack");
        }
        let stack = ConvStack {
            in_size: cfg.crop_size,
            in_channels: 3,
            widths: cfg.conv_widths.clone(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let (mut params, running) = stack.init("id.", &mut rng);
        let flat = stack.flat_len();
        params.push(Tensor::he("id.out.w", &[2, flat], flat, &mut rng));
        params.push(Tensor::zeros("id.out.b", &[2]));
        Ok(Self {
            crop_size: cfg.crop_size,
            context: cfg.context,
            stack,
            params,
            running,
        })
    }

    fn batch(&self, crops: &[&[f32]]) -> Result<Array2<f32>> {
        let px = self.crop_size * self.crop_size;
        if crops.iter().any(|c| c.len() != px * 3) {
            return invalid("crop size does not match the model");
        }
        let data: Vec<f32> = crops.iter().flat_map(|c| c.iter().copied()).collect();
        Ok(Array2::from_shape_vec((crops.len() * px, 3), data).expect("consistent crop sizes"))
    }

    fn logits(&self, crops: &[&[f32]], train: bool) -> Result<(Array2<f32>, Array2<f32>, Vec<crate::nn::BlockCache<f32>>)> {
        let x = self.batch(crops)?;
        let o = self.params.len() - 2;
        let (feat, caches) = self
            .stack
            .forward(&self.params, &self.running, 0, x, crops.len(), train, "id.")?;
        let logits = dense_forward(feat.view(), self.params[o].mat(), self.params[o + 1].vec());
        check_finite(&logits, "id.out")?;
        Ok((logits, feat, caches))
    }

    pub fn crop(&self, fused: &FusedImage, bbox: &BBox) -> Vec<f32> {
        crop_fused(fused, bbox, self.crop_size, self.context)
    }

    /// Serialize the weights in the shared parameter container.
    pub fn save<W: std::io::Write>(&self, w: W) -> Result<()> {
        let cfg = serde_json::to_vec(&(self.crop_size, &self.stack.widths, self.context))?;
        let all: Vec<&Tensor<f32>> = self.params.iter().chain(&self.running).collect();
        write_container(w, ID_MAGIC, &cfg, &all)
    }

    pub fn load<R: std::io::Read>(r: R) -> Result<Self> {
        let (cfg, tensors) = read_container(r, ID_MAGIC)?;
        let (crop_size, conv_widths, context): (usize, Vec<usize>, f64) = serde_json::from_slice(&cfg)?;
        let mut m = Self::new(&IdTrainConfig {
            crop_size,
            context,
            conv_widths,
            ..Default::default()
        })?;
        fill_slots(m.params.iter_mut().chain(m.running.iter_mut()), tensors)?;
        Ok(m)
    }

    /// Probability that each crop shows the transmitter.
    pub fn score(&self, crops: &[Vec<f32>]) -> Result<Vec<f64>> {
        let refs: Vec<&[f32]> = crops.iter().map(|c| &c[..]).collect();
        let mut out = Vec::with_capacity(crops.len());
        for chunk in refs.chunks(128) {
            let (logits, _, _) = self.logits(chunk, false)?;
            for row in logits.outer_iter() {
                let d = (row[0] - row[1]) as f64;
                out.push(1.0 / (1.0 + d.exp()));
            }
        }
        Ok(out)
    }
}

/// Train an identification scorer. Both classes must be present.
pub fn train_id(samples: &[IdSample], cfg: &IdTrainConfig) -> Result<IdModel> {
    let pos = samples.iter().filter(|s| s.is_tx).count();
    if pos == 0 || pos == samples.len() {
        return invalid("identification training needs both transmitter and distractor crops");
    }
    if cfg.batch_size == 0 {
        return invalid("batch size must be positive");
    }
    let mut model = IdModel::new(cfg)?;
    let mut adam = AdamState::new(&model.params, AdamConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x1d);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let o = model.params.len() - 2;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let crops: Vec<&[f32]> = batch.iter().map(|&i| &samples[i].crop[..]).collect();
            let targets: Vec<usize> = batch.iter().map(|&i| samples[i].is_tx as usize).collect();
            let (logits, feat, caches) = model.logits(&crops, true)?;
            let (loss, dlogits) = softmax_xent(logits.view(), &targets);
            let mut grads: Vec<Vec<f32>> = model.params.iter().map(|t| vec![0.0; t.len()]).collect();
            let (dw, db, dfeat) = dense_backward(dlogits.view(), feat.view(), model.params[o].mat());
            add_into(&mut grads[o], dw.iter());
            add_into(&mut grads[o + 1], db.iter());
            model.stack.backward(&model.params, 0, &caches, dfeat, &mut grads);
            adam_step(&mut model.params, &grads, &mut adam, cfg.lr)?;
            model.stack.update_running(&mut model.running, &caches);
            total += loss as f64 * batch.len() as f64;
        }
        log::debug!("id epoch {}: loss {:.4}", epoch + 1, total / samples.len() as f64);
    }
    Ok(model)
}
