//! Detection-level tracker benchmark: a transmitter crossing paths with
//! distractor vehicles, observed through jittered boxes.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::data::sequence_seed;
use super::par_map;
use super::config::ChannelConfig;
use crate::bbox::BBox;
use crate::channel::{oracle_top_n, power_profile, synth_channel, NoiseModel, PathSet};
use crate::error::Result;
use crate::track::{Tracker, TrackerConfig};

const STREAM_BENCH: u64 = 4;
const STREAM_ORACLE: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleSweep {
    pub trials: usize,
    /// Trials whose two nearest steering sines are equally close.
    pub ties: usize,
    pub agree: usize,
    pub agreement: f64,
}

/// Compare the exhaustive-sweep best beam with the nearest steering angle in
/// sine space for `trials` random single-path geometries.
pub fn oracle_sweep(channel: &ChannelConfig, trials: usize, seed: u64) -> Result<OracleSweep> {
    let array = channel.array()?;
    let cb = channel.codebook()?;
    let sines: Vec<f64> = cb.steer_angles.iter().map(|a| a.sin()).collect();
    let (lo, hi) = (cb.sector.lo, cb.sector.hi);
    let mut rng = sequence_seed(seed, STREAM_ORACLE, 0);
    let (mut ties, mut agree) = (0, 0);
    for _ in 0..trials {
        let az = rng.gen_range(lo..=hi);
        let h = synth_channel(&PathSet::los_only(az, 1.0.into()), &array, channel.subcarriers, None)?;
        let best = oracle_top_n(&power_profile(&h, &cb, &NoiseModel::noiseless()), 1)?[0];
        let mut d: Vec<(f64, usize)> = sines.iter().enumerate().map(|(i, s)| ((s - az.sin()).abs(), i)).collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0));
        if d.len() > 1 && (d[1].0 - d[0].0).abs() <= 1e-12 {
            ties += 1;
            continue;
        }
        agree += (d[0].1 == best) as usize;
    }
    let scored = trials - ties;
    Ok(OracleSweep {
        trials,
        ties,
        agree,
        agreement: agree as f64 / scored.max(1) as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub sequences: usize,
    pub frames: usize,
    pub distractors: usize,
    /// Box jitter in pixels.
    pub jitter_px: f64,
    /// Overlap with the true transmitter box that counts as keeping its identity.
    pub iou_threshold: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sequences: 50,
            frames: 200,
            distractors: 3,
            jitter_px: 1.0,
            iou_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerBench {
    pub frames: usize,
    /// Frames whose transmitter track overlaps the true transmitter.
    pub preserved: usize,
    pub preserved_rate: f64,
    /// Frames on which a distractor crossed the transmitter box.
    pub crossings: usize,
    /// Smallest covariance eigenvalue seen on any track at any step.
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, Copy)]
struct Mover {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    vx: f64,
}

impl Mover {
    fn at(&self, t: usize) -> BBox {
        BBox::new(self.x + self.vx * t as f64, self.y, self.w, self.h)
    }
}

fn sequence(cfg: &BenchConfig, tcfg: &TrackerConfig, index: usize, seed: u64) -> Result<(usize, usize, f64)> {
    let mut rng = sequence_seed(seed, STREAM_BENCH, index);
    let span = cfg.frames as f64;
    let tx = Mover {
        x: rng.gen_range(0.0..20.0),
        y: 100.0,
        w: 40.0,
        h: 24.0,
        vx: rng.gen_range(1.0..1.4),
    };
    // Distractors drive the other way, each crossing the transmitter once
    // somewhere in the middle of the sequence.
    let sizes = [(30.0, 18.0), (48.0, 30.0), (36.0, 20.0)];
    let movers: Vec<Mover> = (0..cfg.distractors)
        .map(|k| {
            let (w, h) = sizes[k % sizes.len()];
            let vx = -rng.gen_range(1.0..2.0);
            let cross = span * (k as f64 + 1.0) / (cfg.distractors as f64 + 1.0) + rng.gen_range(-10.0..10.0);
            let x_cross = tx.x + tx.vx * cross;
            Mover {
                x: x_cross - vx * cross + (tx.w - w) / 2.0,
                y: tx.y + rng.gen_range(-6.0..6.0),
                w,
                h,
                vx,
            }
        })
        .collect();
    let noise = Normal::new(0.0, cfg.jitter_px).expect("finite jitter");
    let jitter = |b: BBox, rng: &mut rand_chacha::ChaCha8Rng| {
        BBox::new(
            b.x + noise.sample(rng),
            b.y + noise.sample(rng),
            (b.w + noise.sample(rng)).max(1.0),
            (b.h + noise.sample(rng)).max(1.0),
        )
    };

    let mut tracker = Tracker::new(*tcfg)?;
    tracker.spawn(&tx.at(0), true);
    for m in &movers {
        tracker.spawn(&m.at(0), false);
    }
    let (mut preserved, mut crossings, mut min_eig) = (0, 0, f64::INFINITY);
    for t in 1..cfg.frames {
        let gt = tx.at(t);
        let mut dets = vec![jitter(gt, &mut rng)];
        for m in &movers {
            dets.push(jitter(m.at(t), &mut rng));
        }
        crossings += movers.iter().any(|m| m.at(t).iou(&gt) > 0.0) as usize;
        tracker.step(&dets)?;
        for tr in &tracker.tracks {
            min_eig = min_eig.min(tr.covariance.symmetric_eigenvalues().min());
        }
        preserved += tracker.tx_track().is_some_and(|tr| tr.bbox().iou(&gt) >= cfg.iou_threshold) as usize;
    }
    Ok((preserved, crossings, min_eig))
}

/// Run the benchmark over `cfg.sequences` seeded sequences.
pub fn tracker_benchmark(cfg: &BenchConfig, tcfg: &TrackerConfig, seed: u64) -> Result<TrackerBench> {
    let per = par_map(cfg.sequences, |i| sequence(cfg, tcfg, i, seed))?;
    let frames = cfg.sequences * cfg.frames.saturating_sub(1);
    let preserved = per.iter().map(|p| p.0).sum();
    Ok(TrackerBench {
        frames,
        preserved,
        preserved_rate: preserved as f64 / frames.max(1) as f64,
        crossings: per.iter().map(|p| p.1).sum(),
        min_eigenvalue: per.iter().map(|p| p.2).fold(f64::INFINITY, f64::min),
    })
}
