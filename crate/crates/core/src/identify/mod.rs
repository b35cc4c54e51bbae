//! Transmitter identification: region proposals over the fused detector
//! input, a small conv scorer, multi-frame voting and IoU accuracy.

mod model;

pub use model::{crop_fused, train_id, IdModel, IdSample, IdTrainConfig};

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::bbox::BBox;
use crate::error::{invalid, Error, Result};
use crate::fusion::FusedImage;
use crate::scene::VisualMode;

/// IoU of two boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    a.iou(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub bbox: BBox,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposalConfig {
    /// Foreground threshold on plane values in [0, 1], per visual mode.
    pub threshold_method1: f64,
    pub threshold_rgb: f64,
    pub threshold_power: f64,
    /// Minimum component size in pixels.
    pub min_area: usize,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        Self {
            threshold_method1: 0.5,
            threshold_rgb: 0.35,
            threshold_power: 0.5,
            min_area: 25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdConfig {
    /// Number of frames voted over.
    pub m_id: usize,
    /// IoU threshold for a correct detection.
    pub iou_threshold: f64,
    /// Minimum score for a proposal to count as a detection.
    pub confidence: f64,
}

impl Default for IdConfig {
    fn default() -> Self {
        Self {
            m_id: 5,
            iou_threshold: 0.5,
            confidence: 0.5,
        }
    }
}

impl IdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_id == 0 {
            return invalid("m_id must be positive");
        }
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return invalid("IoU threshold must lie in (0, 1]");
        }
        Ok(())
    }
}

/// 4-connected components of `mask`; returns pixel bounds of components with
/// at least `min_area` pixels, in raster order of their first pixel.
pub fn connected_boxes(mask: &[bool], width: usize, height: usize, min_area: usize) -> Vec<BBox> {
    let mut seen = vec![false; mask.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        let mut area = 0;
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % width, i / width);
            area += 1;
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
            let mut visit = |j: usize| {
                if mask[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < width {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - width);
            }
            if y + 1 < height {
                visit(i + width);
            }
        }
        if area >= min_area {
            out.push(BBox::from_corners(x0 as f64, y0 as f64, (x1 + 1) as f64, (y1 + 1) as f64));
        }
    }
    out
}

/// Unscored candidate boxes.
///
/// Visual modes use connected components of the visual plane. Method2 has no
/// visual content, so contiguous column bands of the power plane become
/// full-height candidates.
pub fn propose(fused: &FusedImage, cfg: &ProposalConfig) -> Vec<BBox> {
    let (w, h) = (fused.width, fused.height);
    match fused.mode {
        VisualMode::Method2 => {
            let thr = (cfg.threshold_power * 255.0).round() as u8;
            let mut out = Vec::new();
            let mut col = 0;
            while col < w {
                if fused.planes[1][col] > thr {
                    let start = col;
                    while col < w && fused.planes[1][col] > thr {
                        col += 1;
                    }
                    if (col - start) * h >= cfg.min_area {
                        out.push(BBox::from_corners(start as f64, 0.0, col as f64, h as f64));
                    }
                } else {
                    col += 1;
                }
            }
            out
        }
        mode => {
            let t = if mode == VisualMode::Rgb {
                cfg.threshold_rgb
            } else {
                cfg.threshold_method1
            };
            let thr = (t * 255.0).round() as u8;
            let mask: Vec<bool> = fused.planes[0].iter().map(|&v| v > thr).collect();
            connected_boxes(&mask, w, h, cfg.min_area)
        }
    }
}

/// Score every proposal of a frame.
pub fn score_proposals(model: &IdModel, fused: &FusedImage, cfg: &ProposalConfig) -> Result<Vec<Proposal>> {
    let boxes = propose(fused, cfg);
    if boxes.is_empty() {
        return Ok(Vec::new());
    }
    let crops: Vec<Vec<f32>> = boxes.iter().map(|b| model.crop(fused, b)).collect();
    let scores = model.score(&crops)?;
    Ok(boxes
        .into_iter()
        .zip(scores)
        .map(|(bbox, score)| Proposal { bbox, score })
        .collect())
}

/// Highest-scoring proposal at or above `confidence`; earlier proposals win ties.
pub fn select_tx(proposals: &[Proposal], confidence: f64) -> Option<Proposal> {
    proposals
        .iter()
        .filter(|p| p.score >= confidence)
        .fold(None, |best: Option<Proposal>, p| match best {
            Some(b) if b.score >= p.score => Some(b),
            _ => Some(*p),
        })
}

pub fn detect_tx(
    model: &IdModel,
    fused: &FusedImage,
    pcfg: &ProposalConfig,
    confidence: f64,
) -> Result<Option<Proposal>> {
    Ok(select_tx(&score_proposals(model, fused, pcfg)?, confidence))
}

/// Majority vote over per-frame `(identity, score)` detections; ties go to
/// the highest mean score, then the lowest identity.
pub fn vote(detections: &[Option<(u64, f64)>]) -> Result<u64> {
    let mut tally: BTreeMap<u64, (usize, f64)> = BTreeMap::new();
    for &(id, score) in detections.iter().flatten() {
        let e = tally.entry(id).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += score;
    }
    tally
        .into_iter()
        .map(|(id, (n, s))| (id, n, s / n as f64))
        .fold(None, |best: Option<(u64, usize, f64)>, c| match best {
            Some(b) if (b.1, b.2) >= (c.1, c.2) => Some(b),
            _ => Some(c),
        })
        .map(|(id, _, _)| id)
        .ok_or_else(|| Error::IdentificationFailure("no detections in any frame".into()))
}

/// Run the detector on each frame, map detections to identities with
/// `identity_of`, and vote.
pub fn identify_multiframe(
    model: &IdModel,
    frames: &[FusedImage],
    pcfg: &ProposalConfig,
    confidence: f64,
    mut identity_of: impl FnMut(usize, &BBox) -> Option<u64>,
) -> Result<u64> {
    let mut dets = Vec::with_capacity(frames.len());
    for (i, f) in frames.iter().enumerate() {
        let d = detect_tx(model, f, pcfg, confidence)?;
        dets.push(d.and_then(|p| identity_of(i, &p.bbox).map(|id| (id, p.score))));
    }
    vote(&dets)
}

/// Fraction of frames whose prediction overlaps the ground truth with IoU >= `z`.
pub fn id_accuracy(preds: &[Option<BBox>], gts: &[BBox], z: f64) -> Result<f64> {
    if preds.is_empty() || preds.len() != gts.len() {
        return invalid("predictions and ground truth must be aligned and non-empty");
    }
    let hits = preds
        .iter()
        .zip(gts)
        .filter(|(p, g)| p.is_some_and(|p| iou(&p, g) >= z))
        .count();
    Ok(hits as f64 / preds.len() as f64)
}

/// One line of the prediction log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub t: u64,
    pub bbox: Option<[f64; 4]>,
    pub score: Option<f64>,
}

impl PredictionRecord {
    pub fn new(t: u64, p: Option<Proposal>) -> Self {
        Self {
            t,
            bbox: p.map(|p| [p.bbox.x, p.bbox.y, p.bbox.w, p.bbox.h]),
            score: p.map(|p| p.score),
        }
    }
}
