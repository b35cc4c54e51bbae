use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{batch_arrays, top_n_accuracy, BeamNet};
use crate::error::{invalid, Result};
use crate::nn::{adam_step, AdamConfig, AdamState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub lr_after_decay: f64,
    pub decay_trigger_val_acc: f64,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            epochs: 30,
            lr_after_decay: 1e-4,
            decay_trigger_val_acc: 0.59,
            batch_size: 32,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > self.lr_after_decay && self.lr_after_decay > 0.0) {
            return invalid("need lr > lr_after_decay > 0");
        }
        if self.batch_size == 0 {
            return invalid("batch size must be positive");
        }
        Ok(())
    }
}

/// One training example: resized isolated image, search bits, oracle beam.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamSample {
    pub image: Vec<f32>,
    pub bits: Vec<bool>,
    pub best: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_top1: f64,
    /// Learning rate used during this epoch.
    pub lr: f64,
}

fn eval_top1(net: &BeamNet<f32>, data: &[BeamSample]) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut preds = Vec::with_capacity(data.len());
    for chunk in data.chunks(64) {
        let imgs: Vec<&[f32]> = chunk.iter().map(|s| &s.image[..]).collect();
        let bits: Vec<&[bool]> = chunk.iter().map(|s| &s.bits[..]).collect();
        preds.extend(net.predict_top_n(&imgs, &bits, 1)?.into_iter().map(|p| p.top_n));
    }
    let oracle: Vec<usize> = data.iter().map(|s| s.best).collect();
    top_n_accuracy(&preds, &oracle, 1)
}

/// Mini-batch Adam training. The learning rate drops to `lr_after_decay`
/// for good after the first epoch whose validation top-1 reaches the trigger.
/// An empty validation set reports 0 and never triggers the decay.
pub fn train(
    net: &mut BeamNet<f32>,
    train_set: &[BeamSample],
    val_set: &[BeamSample],
    cfg: &TrainConfig,
) -> Result<Vec<EpochRecord>> {
    cfg.validate()?;
    if train_set.is_empty() {
        return invalid("empty training set");
    }
    let side = net.cfg.input_size;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(&net.params, cfg.adam);
    let mut lr = cfg.lr;
    let mut decayed = false;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let imgs: Vec<&[f32]> = batch.iter().map(|&i| &train_set[i].image[..]).collect();
            let bits: Vec<&[bool]> = batch.iter().map(|&i| &train_set[i].bits[..]).collect();
            let targets: Vec<usize> = batch.iter().map(|&i| train_set[i].best).collect();
            let (x, b) = batch_arrays(&imgs, &bits, side);
            let (logits, cache) = net.forward(x.view(), b.view(), true)?;
            let (loss, dlogits) = net.loss(logits.view(), b.view(), &targets);
            let grads = net.backward(&cache, dlogits.view());
            adam_step(&mut net.params, &grads, &mut adam, lr)?;
            net.update_running(&cache);
            loss_sum += loss as f64 * batch.len() as f64;
        }
        let val_top1 = eval_top1(net, val_set)?;
        let rec = EpochRecord {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            val_top1,
            lr,
        };
        log::debug!("epoch {epoch}: loss {:.4} val top-1 {:.4} lr {lr}", rec.train_loss, val_top1);
        history.push(rec);
        if !decayed && !val_set.is_empty() && val_top1 >= cfg.decay_trigger_val_acc {
            lr = cfg.lr_after_decay;
            decayed = true;
        }
    }
    Ok(history)
}

pub fn write_history_csv<W: Write>(mut w: W, history: &[EpochRecord]) -> Result<()> {
    writeln!(w, "epoch,train_loss,val_top1,lr")?;
    for r in history {
        writeln!(w, "{},{:.6},{:.6},{}", r.epoch, r.train_loss, r.val_top1, r.lr)?;
    }
    Ok(())
}
