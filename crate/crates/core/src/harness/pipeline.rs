//! Training and evaluation of the full pipeline and its ablations.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::config::ExperimentConfig;
use super::data::{
    build_manifest, generate_sequence, sequence_seed, Frame, Manifest, ScenarioWorld, Split, STREAM_A, STREAM_B,
    STREAM_ID_EVAL,
};
use super::par_map;
use crate::bbox::BBox;
use crate::beamnet::{resize_nearest, train, BeamNet, BeamNetConfig, BeamSample, EpochRecord};
use crate::error::{invalid, Error, Result};
use crate::geometry::{isolate_tx, reduce_search_space, BeamRegion, RegionVariant, SearchSpace};
use crate::identify::{
    crop_fused, score_proposals, select_tx, train_id, vote, IdModel, IdSample, Proposal,
};
use crate::scene::{RgbImage, VisualMode};
use crate::track::Tracker;

/// Frame counts voted over when reporting identification accuracy.
pub const ID_WINDOWS: [usize; 3] = [1, 3, 5];

/// Finds the transmitter in one frame.
pub trait TxDetector: Sync {
    fn detect(&self, frame: &Frame, world: &ScenarioWorld) -> Result<Option<Proposal>>;
}

/// Ranks beams for one frame from the resized isolated image and search bits.
pub trait BeamPredictor: Sync {
    fn top_n(&self, frame: &Frame, image: &[f32], bits: &[bool], n: usize) -> Result<Vec<usize>>;
}

impl BeamPredictor for BeamNet<f32> {
    fn top_n(&self, _frame: &Frame, image: &[f32], bits: &[bool], n: usize) -> Result<Vec<usize>> {
        Ok(self.predict_top_n(&[image], &[bits], n)?.remove(0).top_n)
    }
}

/// Proposal scorer over fused frames.
pub struct ModelDetector<'a> {
    pub model: &'a IdModel,
    pub mode: VisualMode,
    pub zero_power: bool,
    pub proposals: crate::identify::ProposalConfig,
    pub confidence: f64,
}

impl TxDetector for ModelDetector<'_> {
    fn detect(&self, frame: &Frame, world: &ScenarioWorld) -> Result<Option<Proposal>> {
        let fused = frame.fused(world, self.mode, self.zero_power)?;
        Ok(select_tx(&score_proposals(self.model, &fused, &self.proposals)?, self.confidence))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamMetrics {
    pub frames: usize,
    pub top1: f64,
    pub top3: f64,
    pub top5: f64,
    pub mean_popcount: f64,
    /// Mean reduced-set size over the codebook size.
    pub search_fraction: f64,
    pub overhead_reduction: f64,
    /// Frames whose reduced set holds the oracle beam.
    pub containment: f64,
    /// Frames whose reduction came back empty and fell back to all beams.
    pub fallbacks: usize,
    /// Predictions outside the reduced set (must stay zero with masking on).
    pub mask_violations: usize,
}

/// Per-frame outcome used to aggregate [`BeamMetrics`].
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutcome {
    pub best: usize,
    /// `None` when no transmitter box was available.
    pub top5: Option<Vec<usize>>,
    pub space: Option<SearchSpace>,
    pub fallback: bool,
}

pub fn aggregate(outcomes: &[FrameOutcome], q: usize) -> BeamMetrics {
    let n = outcomes.len().max(1) as f64;
    let hit = |k: usize| {
        outcomes
            .iter()
            .filter(|o| o.top5.as_ref().is_some_and(|p| p.iter().take(k).any(|&b| b == o.best)))
            .count() as f64
            / n
    };
    let spaces: Vec<&SearchSpace> = outcomes.iter().filter_map(|o| o.space.as_ref()).collect();
    let mean_pop = if spaces.is_empty() {
        q as f64
    } else {
        spaces.iter().map(|s| s.popcount() as f64).sum::<f64>() / spaces.len() as f64
    };
    let containment = outcomes
        .iter()
        .filter(|o| o.space.as_ref().is_some_and(|s| s.bits[o.best]))
        .count() as f64
        / n;
    let violations = outcomes
        .iter()
        .filter_map(|o| Some((o.top5.as_ref()?, o.space.as_ref()?)))
        .filter(|(p, s)| p.iter().any(|&b| !s.bits[b]))
        .count();
    BeamMetrics {
        frames: outcomes.len(),
        top1: hit(1),
        top3: hit(3),
        top5: hit(5),
        mean_popcount: mean_pop,
        search_fraction: mean_pop / q as f64,
        overhead_reduction: 1.0 - mean_pop / q as f64,
        containment,
        fallbacks: outcomes.iter().filter(|o| o.fallback).count(),
        mask_violations: violations,
    }
}

/// Reduced search space for an isolated image; an empty result falls back to all beams.
pub fn search_space(isolated: &RgbImage, regions: &[BeamRegion], t: u64) -> Result<(SearchSpace, bool)> {
    match reduce_search_space(isolated, regions, t) {
        Ok(s) => Ok((s, false)),
        Err(Error::EmptySearchSpace) => {
            log::debug!("frame {t}: empty search space, using all beams");
            Ok((SearchSpace::all(regions.len(), t), true))
        }
        Err(e) => Err(e),
    }
}

/// What the beam predictor sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BeamInput {
    /// Frame zeroed outside the transmitter box.
    Isolated,
    /// The whole frame; the search space is then computed from it as well.
    FullFrame,
}

/// Network input and search space for one frame and transmitter box.
pub fn beam_input(
    frame: &Frame,
    tx_box: &BBox,
    regions: &[BeamRegion],
    input: BeamInput,
    side: usize,
) -> Result<(Vec<f32>, SearchSpace, bool)> {
    let image = match input {
        BeamInput::Isolated => isolate_tx(&frame.rendered.image, tx_box)?,
        BeamInput::FullFrame => frame.rendered.image.clone(),
    };
    let (space, fallback) = search_space(&image, regions, frame.t as u64)?;
    Ok((resize_nearest(&image, side), space, fallback))
}

/// One frame's cached beam-prediction inputs.
#[derive(Debug, Clone)]
pub struct CachedSample {
    pub sequence: usize,
    pub t: usize,
    pub best: usize,
    pub image: Vec<f32>,
    pub space: SearchSpace,
    pub fallback: bool,
}

/// Ground-truth-box samples for every frame of a scenario.
pub fn scenario_samples(
    cfg: &ExperimentConfig,
    world: &ScenarioWorld,
    stream: u64,
    variant: RegionVariant,
    input: BeamInput,
) -> Result<Vec<CachedSample>> {
    let sc = &world.config;
    let side = cfg.net.input_size;
    let per = par_map(sc.sequences, |s| {
        let frames = generate_sequence(world, &cfg.channel, sc.frames, sequence_seed(cfg.seed, stream, s))?;
        frames
            .iter()
            .map(|f| {
                let b = f.tx_box().ok_or_else(|| Error::InvalidState("missing transmitter box".into()))?;
                let (image, space, fallback) = beam_input(f, &b, world.regions(variant), input, side)?;
                Ok(CachedSample {
                    sequence: s,
                    t: f.t,
                    best: f.best,
                    image,
                    space,
                    fallback,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(per.into_iter().flatten().collect())
}

fn to_beam_samples(samples: &[&CachedSample]) -> Vec<BeamSample> {
    samples
        .iter()
        .map(|s| BeamSample {
            image: s.image.clone(),
            bits: s.space.bits.clone(),
            best: s.best,
        })
        .collect()
}

/// Score cached samples with a predictor.
pub fn evaluate_cached(net: &BeamNet<f32>, samples: &[&CachedSample], q: usize) -> Result<BeamMetrics> {
    let mut outcomes = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(64) {
        let imgs: Vec<&[f32]> = chunk.iter().map(|s| &s.image[..]).collect();
        let bits: Vec<&[bool]> = chunk.iter().map(|s| &s.space.bits[..]).collect();
        for (p, s) in net.predict_top_n(&imgs, &bits, 5)?.into_iter().zip(chunk) {
            outcomes.push(FrameOutcome {
                best: s.best,
                top5: Some(p.top_n),
                space: Some(s.space.clone()),
                fallback: s.fallback,
            });
        }
    }
    Ok(aggregate(&outcomes, q))
}

fn split_refs<'a>(samples: &'a [CachedSample], manifest: &Manifest, split: Split) -> Vec<&'a CachedSample> {
    samples
        .iter()
        .zip(manifest.frames.iter())
        .filter(|(_, m)| m.split == split)
        .map(|(s, _)| s)
        .collect()
}

/// Train a beam network on the training split and record its history.
pub fn train_beam(
    cfg: &ExperimentConfig,
    net_cfg: BeamNetConfig,
    train_set: &[&CachedSample],
    val_set: &[&CachedSample],
) -> Result<(BeamNet<f32>, Vec<EpochRecord>)> {
    let mut net = BeamNet::<f32>::new(net_cfg, cfg.seed ^ 0xbea4)?;
    let tcfg = crate::beamnet::TrainConfig {
        seed: cfg.seed ^ 0x7a1,
        ..cfg.train.clone()
    };
    let history = train(&mut net, &to_beam_samples(train_set), &to_beam_samples(val_set), &tcfg)?;
    Ok((net, history))
}

// ---------------------------------------------------------------------------
// Identification

/// Crops of every proposal in the identification window of each training sequence.
pub fn id_training_set(
    cfg: &ExperimentConfig,
    world: &ScenarioWorld,
    mode: VisualMode,
    zero_power: bool,
) -> Result<Vec<IdSample>> {
    let sc = &world.config;
    let window = (sc.street.separation_frames + 1).min(sc.frames);
    let (crop, context) = (cfg.id_train.crop_size, cfg.id_train.context);
    let per = par_map(sc.sequences, |s| {
        let frames = generate_sequence(world, &cfg.channel, window, sequence_seed(cfg.seed, STREAM_A, s))?;
        let mut out = Vec::new();
        for f in &frames {
            let fused = f.fused(world, mode, zero_power)?;
            for b in crate::identify::propose(&fused, &cfg.proposals) {
                out.push(IdSample {
                    crop: crop_fused(&fused, &b, crop, context),
                    is_tx: f.identity_in(&b) == Some(f.tx_id),
                });
            }
        }
        Ok(out)
    })?;
    Ok(per.into_iter().flatten().collect())
}

/// Identity of the transmitter voted over `frames`.
pub fn identify_frames(det: &dyn TxDetector, world: &ScenarioWorld, frames: &[Frame]) -> Result<u32> {
    let mut votes = Vec::with_capacity(frames.len());
    for f in frames {
        let d = det.detect(f, world)?;
        votes.push(d.and_then(|p| f.identity_in(&p.bbox).map(|id| (id as u64, p.score))));
    }
    vote(&votes).map(|id| id as u32)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdMetrics {
    pub frames: usize,
    pub m1: f64,
    pub m3: f64,
    pub m5: f64,
}

/// Raw identification outcomes on the held-out identification sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct IdEvaluation {
    pub metrics: IdMetrics,
    /// Single-frame hits on the first scored frame of each sequence.
    pub first_hits: Vec<bool>,
    /// Chance of a hit when picking a proposal uniformly, same frames.
    pub first_uniform: Vec<f64>,
}

impl IdEvaluation {
    /// Expected hits under uniform selection and the two-sided chi-square p-value.
    pub fn uniform_test(&self) -> (f64, f64) {
        let observed = self.first_hits.iter().filter(|&&h| h).count() as f64;
        let expected: f64 = self.first_uniform.iter().sum();
        let var: f64 = self.first_uniform.iter().map(|p| p * (1.0 - p)).sum();
        if var <= 0.0 {
            return (expected, if (observed - expected).abs() < 1e-9 { 1.0 } else { 0.0 });
        }
        let chi2 = (observed - expected).powi(2) / var;
        let dist = ChiSquared::new(1.0).expect("one degree of freedom");
        (expected, 1.0 - dist.cdf(chi2))
    }
}

/// Score a detector on fresh sequences of scenario A.
///
/// Every frame from the fifth to the last separated one is scored at each
/// window length in [`ID_WINDOWS`], so the window lengths share frames.
pub fn evaluate_identification(
    cfg: &ExperimentConfig,
    world: &ScenarioWorld,
    det: &dyn TxDetector,
    mode: VisualMode,
) -> Result<IdEvaluation> {
    let sc = &world.config;
    let last = sc.street.separation_frames;
    let first = ID_WINDOWS[2] - 1;
    let z = cfg.id.iou_threshold;
    let per = par_map(cfg.id_eval_sequences, |s| {
        let frames = generate_sequence(world, &cfg.channel, last + 1, sequence_seed(cfg.seed, STREAM_ID_EVAL, s))?;
        let dets: Vec<Option<Proposal>> = frames.iter().map(|f| det.detect(f, world)).collect::<Result<_>>()?;
        let mut hits = Vec::new();
        for t in first..=last {
            let f = &frames[t];
            let gt = f.tx_box().ok_or_else(|| Error::InvalidState("missing transmitter box".into()))?;
            let mut row = [false; 3];
            for (k, &m) in ID_WINDOWS.iter().enumerate() {
                let votes: Vec<Option<(u64, f64)>> = (t + 1 - m..=t)
                    .map(|i| {
                        dets[i].and_then(|p| frames[i].identity_in(&p.bbox).map(|id| (id as u64, p.score)))
                    })
                    .collect();
                let Ok(id) = vote(&votes) else { continue };
                // The voted object's box in the scored frame.
                let pred = if dets[t].is_some_and(|p| f.identity_in(&p.bbox) == Some(id as u32)) {
                    dets[t].map(|p| p.bbox)
                } else {
                    let fused = f.fused(world, mode, false)?;
                    crate::identify::propose(&fused, &cfg.proposals)
                        .into_iter()
                        .find(|b| f.identity_in(b) == Some(id as u32))
                };
                row[k] = pred.is_some_and(|p| p.iou(&gt) >= z);
            }
            hits.push(row);
        }
        // Uniform-choice baseline on the first scored frame.
        let f = &frames[first];
        let gt = f.tx_box().expect("checked above");
        let props = crate::identify::propose(&f.fused(world, mode, false)?, &cfg.proposals);
        let uniform = if props.is_empty() {
            0.0
        } else {
            props.iter().filter(|b| b.iou(&gt) >= z).count() as f64 / props.len() as f64
        };
        Ok((hits, uniform))
    })?;
    let rows: Vec<[bool; 3]> = per.iter().flat_map(|(h, _)| h.iter().copied()).collect();
    let n = rows.len().max(1) as f64;
    let acc = |k: usize| rows.iter().filter(|r| r[k]).count() as f64 / n;
    Ok(IdEvaluation {
        metrics: IdMetrics {
            frames: rows.len(),
            m1: acc(0),
            m3: acc(1),
            m5: acc(2),
        },
        first_hits: per.iter().map(|(h, _)| h[0][0]).collect(),
        first_uniform: per.iter().map(|(_, u)| *u).collect(),
    })
}

// ---------------------------------------------------------------------------
// End to end

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndToEndMetrics {
    /// Frames without a transmitter box count as misses.
    pub all: BeamMetrics,
    /// Frames without a transmitter box are left out.
    pub excluding_failures: BeamMetrics,
    pub reidentifications: usize,
    pub unresolved_frames: usize,
    /// Scored frames whose transmitter box overlaps the ground truth at the IoU threshold.
    pub box_accuracy: f64,
}

/// Transmitter box for every frame of one sequence: identification over the
/// first `m_id` frames, tracking afterwards, re-identification when the track
/// is lost. Returns the boxes and the number of re-identifications.
pub fn pipeline_boxes(
    cfg: &ExperimentConfig,
    world: &ScenarioWorld,
    det: &dyn TxDetector,
    frames: &[Frame],
) -> Result<(Vec<Option<BBox>>, usize)> {
    let m = cfg.id.m_id;
    let min_area = cfg.proposals.min_area;
    let mut out = vec![None; frames.len()];
    let mut reids = 0;
    let mut t = 0;
    let mut first = true;
    while t < frames.len() {
        if !first {
            reids += 1;
        }
        first = false;
        let end = (t + m).min(frames.len());
        let id = match identify_frames(det, world, &frames[t..end]) {
            Ok(id) => id,
            Err(Error::IdentificationFailure(_)) => {
                t = end;
                continue;
            }
            Err(e) => return Err(e),
        };
        for f in &frames[t..end] {
            out[f.t] = f.instance_boxes(min_area).into_iter().find(|(i, _)| *i == id).map(|(_, b)| b);
        }
        let seed_frame = &frames[end - 1];
        let seed_boxes = seed_frame.instance_boxes(min_area);
        let mut tracker = Tracker::new(cfg.tracker)?;
        if !seed_boxes.iter().any(|(i, _)| *i == id) {
            t = end;
            continue;
        }
        for (i, b) in &seed_boxes {
            tracker.spawn(b, *i == id);
        }
        t = frames.len();
        for f in &frames[end..] {
            let dets: Vec<BBox> = f.instance_boxes(min_area).into_iter().map(|(_, b)| b).collect();
            tracker.step(&dets)?;
            match tracker.tx_track() {
                Some(tr) => out[f.t] = Some(tr.bbox()),
                None => {
                    log::debug!("tracking lost at frame {}; re-identifying", f.t);
                    t = f.t;
                    break;
                }
            }
        }
    }
    Ok((out, reids))
}

/// Run identification, tracking and beam prediction over the scored frames
/// of a scenario. `scored(sequence, t)` selects the frames that count.
pub fn evaluate_end_to_end(
    cfg: &ExperimentConfig,
    world: &ScenarioWorld,
    stream: u64,
    det: &dyn TxDetector,
    predictor: &dyn BeamPredictor,
    variant: RegionVariant,
    scored: &(dyn Fn(usize, usize) -> bool + Sync),
) -> Result<EndToEndMetrics> {
    let sc = &world.config;
    let side = cfg.net.input_size;
    let z = cfg.id.iou_threshold;
    let per = par_map(sc.sequences, |s| {
        let frames = generate_sequence(world, &cfg.channel, sc.frames, sequence_seed(cfg.seed, stream, s))?;
        let (boxes, reids) = pipeline_boxes(cfg, world, det, &frames)?;
        let mut outcomes = Vec::new();
        let mut box_hits = 0;
        for f in frames.iter().filter(|f| scored(s, f.t)) {
            let gt = f.tx_box().ok_or_else(|| Error::InvalidState("missing transmitter box".into()))?;
            let input = boxes[f.t].and_then(|b| beam_input(f, &b, world.regions(variant), BeamInput::Isolated, side).ok());
            box_hits += boxes[f.t].is_some_and(|b| b.iou(&gt) >= z) as usize;
            outcomes.push(match input {
                Some((image, space, fallback)) => FrameOutcome {
                    best: f.best,
                    top5: Some(predictor.top_n(f, &image, &space.bits, 5)?),
                    space: Some(space),
                    fallback,
                },
                None => FrameOutcome {
                    best: f.best,
                    top5: None,
                    space: None,
                    fallback: false,
                },
            });
        }
        Ok((outcomes, reids, box_hits))
    })?;
    let q = world.codebook.len();
    let outcomes: Vec<FrameOutcome> = per.iter().flat_map(|(o, _, _)| o.iter().cloned()).collect();
    let resolved: Vec<FrameOutcome> = outcomes.iter().filter(|o| o.top5.is_some()).cloned().collect();
    let box_hits: usize = per.iter().map(|(_, _, h)| h).sum();
    Ok(EndToEndMetrics {
        all: aggregate(&outcomes, q),
        excluding_failures: aggregate(&resolved, q),
        reidentifications: per.iter().map(|(_, r, _)| r).sum(),
        unresolved_frames: outcomes.len() - resolved.len(),
        box_accuracy: box_hits as f64 / outcomes.len().max(1) as f64,
    })
}

// ---------------------------------------------------------------------------
// Ablations and the full run

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    /// Full frame instead of the isolated transmitter.
    #[serde(rename = "1")]
    FullFrame,
    /// No search-space pathway and no mask.
    #[serde(rename = "2")]
    NoSearchSpace,
    /// Strip regions instead of fan regions.
    #[serde(rename = "3")]
    StripRegions,
    /// Grayscale visual plane for the detector.
    IdRgb,
    /// Silhouettes with the power plane zeroed.
    IdZero,
}

impl Ablation {
    pub const ALL: [Ablation; 5] = [
        Ablation::FullFrame,
        Ablation::NoSearchSpace,
        Ablation::StripRegions,
        Ablation::IdRgb,
        Ablation::IdZero,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Ablation::FullFrame => "1",
            Ablation::NoSearchSpace => "2",
            Ablation::StripRegions => "3",
            Ablation::IdRgb => "id-rgb",
            Ablation::IdZero => "id-zero",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub top1: f64,
    pub top3: f64,
    pub top5: f64,
    pub containment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdAblationRow {
    pub name: String,
    pub frames: usize,
    pub accuracy: f64,
    /// Accuracy expected from picking a proposal uniformly at random.
    pub uniform_baseline: f64,
    /// Chi-square p-value of the single-frame hits against the uniform baseline.
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub seed: u64,
    pub identification: IdMetrics,
    pub identification_uniform_baseline: f64,
    pub beam_gt: BeamMetrics,
    pub beam_gt_transfer: BeamMetrics,
    pub end_to_end: EndToEndMetrics,
    pub end_to_end_transfer: EndToEndMetrics,
    pub fan_containment: f64,
    pub strip_containment: f64,
    pub search_fraction: f64,
    pub overhead_reduction: f64,
    pub ablations: Vec<AblationRow>,
    pub id_ablations: Vec<IdAblationRow>,
}

/// Everything a run produces besides the report.
pub struct RunOutput {
    pub report: MetricsReport,
    pub manifest: Manifest,
    pub history: Vec<EpochRecord>,
    pub beam_net: BeamNet<f32>,
    pub id_model: IdModel,
    /// Search spaces of the held-out ground-truth-box frames, in manifest order.
    pub test_spaces: Vec<SearchSpace>,
    /// Scenario A geometry, for overlays.
    pub world_a: ScenarioWorld,
}

/// Shared state of one experiment: both scenario worlds, the split and the
/// cached ground-truth-box samples.
pub struct Experiment {
    pub cfg: ExperimentConfig,
    pub world_a: ScenarioWorld,
    pub world_b: ScenarioWorld,
    pub manifest: Manifest,
    pub samples_a: Vec<CachedSample>,
}

impl Experiment {
    pub fn prepare(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let world_a = ScenarioWorld::build(&cfg.scenario_a, &cfg.channel)?;
        let world_b = ScenarioWorld::build(&cfg.scenario_b, &cfg.channel)?;
        let samples_a = scenario_samples(cfg, &world_a, STREAM_A, cfg.region_variant, BeamInput::Isolated)?;
        let bests_a = group_bests(&samples_a, cfg.scenario_a.sequences);
        let bests_b = super::data::scenario_bests(&world_b, cfg, STREAM_B)?;
        let manifest = build_manifest(cfg, &bests_a, &bests_b);
        Ok(Self {
            cfg: cfg.clone(),
            world_a,
            world_b,
            manifest,
            samples_a,
        })
    }

    fn is_test(&self, s: usize, t: usize) -> bool {
        let frames = self.cfg.scenario_a.frames;
        self.manifest.frames[s * frames + t].split == Split::Test
    }

    pub fn train_id(&self, mode: VisualMode, zero_power: bool) -> Result<IdModel> {
        let samples = id_training_set(&self.cfg, &self.world_a, mode, zero_power)?;
        train_id(&samples, &self.cfg.id_train)
    }

    pub fn train_beam(&self, net_cfg: BeamNetConfig, samples: &[CachedSample]) -> Result<(BeamNet<f32>, Vec<EpochRecord>)> {
        let tr = split_refs(samples, &self.manifest, Split::Train);
        let te = split_refs(samples, &self.manifest, Split::Test);
        train_beam(&self.cfg, net_cfg, &tr, &te)
    }

    pub fn test_refs<'a>(&self, samples: &'a [CachedSample]) -> Vec<&'a CachedSample> {
        split_refs(samples, &self.manifest, Split::Test)
    }
}

fn group_bests(samples: &[CachedSample], sequences: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); sequences];
    for s in samples {
        out[s.sequence].push(s.best);
    }
    out
}

/// Run one ablation against a prepared experiment.
pub fn run_ablation(exp: &Experiment, which: Ablation) -> Result<(Option<AblationRow>, Option<IdAblationRow>)> {
    let cfg = &exp.cfg;
    let q = cfg.channel.q;
    match which {
        Ablation::FullFrame | Ablation::NoSearchSpace | Ablation::StripRegions => {
            let (net_cfg, samples) = match which {
                Ablation::FullFrame => (
                    cfg.net.clone(),
                    Some(scenario_samples(cfg, &exp.world_a, STREAM_A, cfg.region_variant, BeamInput::FullFrame)?),
                ),
                Ablation::NoSearchSpace => (
                    BeamNetConfig {
                        use_search_pathway: false,
                        use_mask: false,
                        ..cfg.net.clone()
                    },
                    None,
                ),
                _ => (
                    cfg.net.clone(),
                    Some(scenario_samples(cfg, &exp.world_a, STREAM_A, RegionVariant::Strip, BeamInput::Isolated)?),
                ),
            };
            let samples = samples.as_deref().unwrap_or(&exp.samples_a);
            let (net, _) = exp.train_beam(net_cfg, samples)?;
            let m = evaluate_cached(&net, &exp.test_refs(samples), q)?;
            Ok((
                Some(AblationRow {
                    name: which.name().into(),
                    top1: m.top1,
                    top3: m.top3,
                    top5: m.top5,
                    containment: m.containment,
                }),
                None,
            ))
        }
        Ablation::IdRgb | Ablation::IdZero => {
            let (mode, zero, confidence) = match which {
                Ablation::IdRgb => (VisualMode::Rgb, false, cfg.id.confidence),
                // A scorer without the power cue is calibrated to the prior of
                // roughly one transmitter per frame and rarely clears 0.5, so
                // the information test uses its ranking alone.
                _ => (cfg.visual_mode, true, 0.0),
            };
            let model = exp.train_id(mode, zero)?;
            let det = ModelDetector {
                model: &model,
                mode,
                zero_power: zero,
                proposals: cfg.proposals,
                confidence,
            };
            let ev = evaluate_identification(cfg, &exp.world_a, &det, mode)?;
            let (expected, p) = ev.uniform_test();
            Ok((
                None,
                Some(IdAblationRow {
                    name: which.name().into(),
                    frames: ev.first_hits.len(),
                    accuracy: ev.first_hits.iter().filter(|&&h| h).count() as f64 / ev.first_hits.len().max(1) as f64,
                    uniform_baseline: expected / ev.first_hits.len().max(1) as f64,
                    p_value: p,
                }),
            ))
        }
    }
}

/// Train every model, evaluate every condition and, when asked, every ablation.
pub fn run_experiment(cfg: &ExperimentConfig, ablations: &[Ablation]) -> Result<RunOutput> {
    run_experiment_with(cfg, ablations, None, None)
}

/// [`run_experiment`] reusing already trained models where given. The
/// training history is empty when the beam network is supplied.
pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    ablations: &[Ablation],
    id_model: Option<IdModel>,
    beam_net: Option<BeamNet<f32>>,
) -> Result<RunOutput> {
    let exp = Experiment::prepare(cfg)?;
    let q = cfg.channel.q;
    log::info!(
        "prepared {} scenario-A frames ({} train / {} test)",
        exp.samples_a.len(),
        exp.manifest.train,
        exp.manifest.test
    );

    let id_model = match id_model {
        Some(m) => m,
        None => exp.train_id(cfg.visual_mode, false)?,
    };
    let det = ModelDetector {
        model: &id_model,
        mode: cfg.visual_mode,
        zero_power: false,
        proposals: cfg.proposals,
        confidence: cfg.id.confidence,
    };
    let id_eval = evaluate_identification(cfg, &exp.world_a, &det, cfg.visual_mode)?;
    log::info!("identification: {:?}", id_eval.metrics);

    let (net, history) = match beam_net {
        Some(n) if n.cfg == cfg.net => (n, Vec::new()),
        Some(_) => return invalid("beam network config does not match the experiment"),
        None => exp.train_beam(cfg.net.clone(), &exp.samples_a)?,
    };
    let test = exp.test_refs(&exp.samples_a);
    let beam_gt = evaluate_cached(&net, &test, q)?;
    let samples_b = scenario_samples(cfg, &exp.world_b, STREAM_B, cfg.region_variant, BeamInput::Isolated)?;
    let refs_b: Vec<&CachedSample> = samples_b.iter().collect();
    let beam_gt_transfer = evaluate_cached(&net, &refs_b, q)?;
    log::info!("beam (ground-truth boxes): {beam_gt:?}");

    let strip = scenario_samples(cfg, &exp.world_a, STREAM_A, RegionVariant::Strip, BeamInput::Isolated)?;
    let strip_test = exp.test_refs(&strip);
    let contained = |v: &[&CachedSample]| {
        v.iter().filter(|s| s.space.bits[s.best]).count() as f64 / v.len().max(1) as f64
    };
    let strip_containment = contained(&strip_test);
    drop(strip);

    let is_test = |s: usize, t: usize| exp.is_test(s, t);
    let end_to_end = evaluate_end_to_end(cfg, &exp.world_a, STREAM_A, &det, &net, cfg.region_variant, &is_test)?;
    let end_to_end_transfer =
        evaluate_end_to_end(cfg, &exp.world_b, STREAM_B, &det, &net, cfg.region_variant, &|_, _| true)?;
    log::info!("end to end: {:?}", end_to_end.all);

    let mut rows = Vec::new();
    let mut id_rows = Vec::new();
    for &a in ablations {
        log::info!("ablation {}", a.name());
        let (r, i) = run_ablation(&exp, a)?;
        rows.extend(r);
        id_rows.extend(i);
    }
    let (expected, _) = id_eval.uniform_test();
    let report = MetricsReport {
        schema_version: super::SCHEMA_VERSION,
        seed: cfg.seed,
        identification: id_eval.metrics,
        identification_uniform_baseline: expected / id_eval.first_hits.len().max(1) as f64,
        beam_gt,
        beam_gt_transfer,
        end_to_end,
        end_to_end_transfer,
        fan_containment: contained(&test),
        strip_containment,
        search_fraction: beam_gt.search_fraction,
        overhead_reduction: beam_gt.overhead_reduction,
        ablations: rows,
        id_ablations: id_rows,
    };
    let test_spaces = test.iter().map(|s| s.space.clone()).collect();
    Ok(RunOutput {
        report,
        manifest: exp.manifest,
        history,
        beam_net: net,
        id_model,
        test_spaces,
        world_a: exp.world_a,
    })
}

/// Acceptance thresholds that a report misses; empty when all hold.
pub fn acceptance_failures(r: &MetricsReport) -> Vec<String> {
    let mut out = Vec::new();
    let mut check = |ok: bool, msg: String| {
        if !ok {
            out.push(msg);
        }
    };
    check(r.fan_containment >= 0.99, format!("fan containment {:.4} < 0.99", r.fan_containment));
    check(
        r.fan_containment >= r.strip_containment,
        format!("fan containment {:.4} < strip {:.4}", r.fan_containment, r.strip_containment),
    );
    check(r.identification.m1 >= 0.95, format!("identification m=1 {:.4} < 0.95", r.identification.m1));
    check(
        r.identification.m5 >= r.identification.m1,
        format!("identification m=5 {:.4} < m=1 {:.4}", r.identification.m5, r.identification.m1),
    );
    let e = &r.end_to_end.all;
    check(e.top5 >= 0.95, format!("end-to-end top-5 {:.4} < 0.95", e.top5));
    check(e.top1 >= 0.55, format!("end-to-end top-1 {:.4} < 0.55", e.top1));
    let gap = e.top5 - r.end_to_end_transfer.all.top5;
    check(gap <= 0.06, format!("transfer top-5 gap {gap:.4} > 0.06"));
    check(r.overhead_reduction > 0.85, format!("overhead reduction {:.4} <= 0.85", r.overhead_reduction));
    for (name, m) in [("ground-truth", &r.beam_gt), ("end-to-end", &r.end_to_end.all)] {
        check(m.mask_violations == 0, format!("{name}: {} predictions outside the search space", m.mask_violations));
    }
    out
}

/// Rates must be probabilities and top-N accuracies must not decrease with N.
pub fn validate_report(r: &MetricsReport) -> Result<()> {
    let beams = [
        ("beam_gt", &r.beam_gt),
        ("beam_gt_transfer", &r.beam_gt_transfer),
        ("end_to_end", &r.end_to_end.all),
        ("end_to_end_excl", &r.end_to_end.excluding_failures),
        ("transfer_end_to_end", &r.end_to_end_transfer.all),
        ("transfer_end_to_end_excl", &r.end_to_end_transfer.excluding_failures),
    ];
    let mut rates: Vec<(String, f64)> = vec![
        ("identification.m1".into(), r.identification.m1),
        ("identification.m3".into(), r.identification.m3),
        ("identification.m5".into(), r.identification.m5),
        ("identification_uniform_baseline".into(), r.identification_uniform_baseline),
        ("fan_containment".into(), r.fan_containment),
        ("strip_containment".into(), r.strip_containment),
        ("search_fraction".into(), r.search_fraction),
        ("overhead_reduction".into(), r.overhead_reduction),
    ];
    for (name, b) in beams {
        for (k, v) in [
            ("top1", b.top1),
            ("top3", b.top3),
            ("top5", b.top5),
            ("containment", b.containment),
            ("search_fraction", b.search_fraction),
            ("overhead_reduction", b.overhead_reduction),
        ] {
            rates.push((format!("{name}.{k}"), v));
        }
        if !(b.top1 <= b.top3 && b.top3 <= b.top5) {
            return invalid(format!("{name}: top-N accuracies are not monotone"));
        }
    }
    for a in &r.ablations {
        rates.extend([
            (format!("ablation {}.top1", a.name), a.top1),
            (format!("ablation {}.top5", a.name), a.top5),
        ]);
        if !(a.top1 <= a.top3 && a.top3 <= a.top5) {
            return invalid(format!("ablation {}: top-N accuracies are not monotone", a.name));
        }
    }
    for a in &r.id_ablations {
        rates.extend([
            (format!("{}.accuracy", a.name), a.accuracy),
            (format!("{}.p_value", a.name), a.p_value),
        ]);
    }
    for (name, v) in rates {
        if !(0.0..=1.0).contains(&v) {
            return invalid(format!("{name} = {v} is not a rate"));
        }
    }
    Ok(())
}
