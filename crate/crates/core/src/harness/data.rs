//! Scenario geometry, per-sequence frame synthesis and on-disk datasets.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ChannelConfig, ExperimentConfig, ScenarioConfig};
use crate::bbox::BBox;
use crate::channel::{
    oracle_top_n, power_profile, synth_channel, write_profiles_csv, AntennaArray, Codebook, Path as RayPath,
    PathSet, PowerProfile,
};
use crate::error::{Error, Result};
use crate::fusion::{beam_column_map, fuse, rasterize_profile, ColumnMap, FusedImage};
use crate::geometry::{
    beam_regions, estimate_vp, pole_edge_segments, BeamRegion, RegionVariant, VanishingPoint,
};
use crate::scene::io::{write_jsonl, write_ppm, BoxAnnotation, FrameAnnotation};
use crate::scene::{
    azimuth_of, preprocess, render, spawn_scene, step_scene, BsPose, Camera, ObjectKind, Rendered, VisualMode,
    WorldObject, BACKGROUND,
};

/// Fixed geometry of one scenario: camera, codebook and beam regions.
#[derive(Debug, Clone)]
pub struct ScenarioWorld {
    pub config: ScenarioConfig,
    pub camera: Camera,
    pub pose: BsPose,
    pub array: AntennaArray,
    pub codebook: Codebook,
    pub colmap: ColumnMap,
    pub vp: Option<VanishingPoint>,
    pub fan: Vec<BeamRegion>,
    pub strip: Vec<BeamRegion>,
}

impl ScenarioWorld {
    pub fn build(config: &ScenarioConfig, channel: &ChannelConfig) -> Result<Self> {
        let camera = config.camera.camera()?;
        let codebook = channel.codebook()?;
        let colmap = beam_column_map(&codebook, &camera)?;
        // The poles are static, so one set of segments calibrates the camera.
        let poles: Vec<WorldObject> = spawn_scene(
            &config.street,
            1,
            config.dt,
            &BsPose::from(&camera),
            &mut ChaCha8Rng::seed_from_u64(0),
        )?
        .into_iter()
        .filter(|o| o.kind == ObjectKind::Pole)
        .collect();
        let vp = match estimate_vp(&pole_edge_segments(&camera, &poles)) {
            Ok(v) => Some(v),
            Err(Error::NoVanishingPoint(msg)) => {
                log::info!("scenario {}: {msg}; using strip regions", config.name);
                None
            }
            Err(e) => return Err(e),
        };
        let strip = beam_regions(&colmap, RegionVariant::Strip, None)?;
        let fan = match vp {
            Some(v) => beam_regions(&colmap, RegionVariant::Fan, Some(v.vp))?,
            None => strip.clone(),
        };
        Ok(Self {
            config: config.clone(),
            camera,
            pose: BsPose::from(&camera),
            array: channel.array()?,
            codebook,
            colmap,
            vp,
            fan,
            strip,
        })
    }

    pub fn regions(&self, variant: RegionVariant) -> &[BeamRegion] {
        match variant {
            RegionVariant::Fan => &self.fan,
            RegionVariant::Strip => &self.strip,
        }
    }
}

/// One synthesized time step.
#[derive(Debug, Clone)]
pub struct Frame {
    pub t: usize,
    pub rendered: Rendered,
    pub objects: Vec<WorldObject>,
    pub tx_id: u32,
    pub tx_azimuth: f64,
    pub profile: PowerProfile,
    /// Oracle best beam.
    pub best: usize,
}

impl Frame {
    pub fn tx_box(&self) -> Option<BBox> {
        self.rendered.boxes.iter().find(|(id, _)| *id == self.tx_id).map(|(_, b)| *b)
    }

    pub fn is_vehicle(&self, label: u32) -> bool {
        self.objects.iter().any(|o| o.id == label && o.is_vehicle())
    }

    /// Bounds of each vehicle's visible pixels, for vehicles with at least
    /// `min_area` visible pixels; sorted by id.
    pub fn instance_boxes(&self, min_area: usize) -> Vec<(u32, BBox)> {
        let w = self.rendered.image.width;
        let mut acc: BTreeMap<u32, (usize, usize, usize, usize, usize)> = BTreeMap::new();
        for (i, &l) in self.rendered.labels.iter().enumerate() {
            if l == BACKGROUND || !self.is_vehicle(l) {
                continue;
            }
            let (x, y) = (i % w, i / w);
            let e = acc.entry(l).or_insert((usize::MAX, usize::MAX, 0, 0, 0));
            e.0 = e.0.min(x);
            e.1 = e.1.min(y);
            e.2 = e.2.max(x);
            e.3 = e.3.max(y);
            e.4 += 1;
        }
        acc.into_iter()
            .filter(|(_, e)| e.4 >= min_area)
            .map(|(id, e)| {
                (id, BBox::from_corners(e.0 as f64, e.1 as f64, (e.2 + 1) as f64, (e.3 + 1) as f64))
            })
            .collect()
    }

    /// Vehicle with the most visible pixels inside `b`.
    pub fn identity_in(&self, b: &BBox) -> Option<u32> {
        let w = self.rendered.image.width;
        let (cols, rows) = b.pixel_ranges(w, self.rendered.image.height);
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for row in rows {
            for col in cols.clone() {
                let l = self.rendered.labels[row * w + col];
                if l != BACKGROUND && self.is_vehicle(l) {
                    *counts.entry(l).or_default() += 1;
                }
            }
        }
        counts
            .into_iter()
            .fold(None, |best: Option<(u32, usize)>, (id, n)| match best {
                Some(b) if b.1 >= n => Some(b),
                _ => Some((id, n)),
            })
            .map(|(id, _)| id)
    }

    /// Detector input for this frame.
    pub fn fused(&self, world: &ScenarioWorld, mode: VisualMode, zero_power: bool) -> Result<FusedImage> {
        let visual = preprocess(&self.rendered.image, &self.rendered.labels, |l| self.is_vehicle(l), mode)?;
        let mut power = rasterize_profile(&self.profile, &world.colmap)?;
        if zero_power {
            power.data.iter_mut().for_each(|v| *v = 0.0);
        }
        fuse(&visual, &power, mode)
    }
}

/// LOS path to the transmitter plus its mirror image in the facade behind the street.
pub fn tx_paths(tx: &WorldObject, pose: &BsPose, channel: &ChannelConfig) -> PathSet {
    let los = azimuth_of(tx.position, pose);
    let mut paths = vec![RayPath {
        azimuth: los,
        gain: Complex64::new(1.0, 0.0),
    }];
    if channel.reflection_amplitude > 0.0 {
        let [x, y, z] = tx.position;
        let mirror = [x, y, 2.0 * channel.facade_depth_m - z];
        paths.push(RayPath {
            azimuth: azimuth_of(mirror, pose),
            gain: Complex64::new(channel.reflection_amplitude, 0.0),
        });
    }
    PathSet { paths, los: 0 }
}

/// Seed for sequence `index` of stream `stream` (scenario or purpose).
pub fn sequence_seed(seed: u64, stream: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index as u64);
    rng
}

pub const STREAM_A: u64 = 1;
pub const STREAM_B: u64 = 2;
pub const STREAM_ID_EVAL: u64 = 3;

/// Synthesize `frames` frames of one sequence. Pure in its arguments.
pub fn generate_sequence(
    world: &ScenarioWorld,
    channel: &ChannelConfig,
    frames: usize,
    mut rng: ChaCha8Rng,
) -> Result<Vec<Frame>> {
    let cfg = &world.config;
    let mut objects = spawn_scene(&cfg.street, frames, cfg.dt, &world.pose, &mut rng)?;
    let phase_seed: u64 = rand::Rng::gen(&mut rng);
    let mut out = Vec::with_capacity(frames);
    for t in 0..frames {
        let tx = objects
            .iter()
            .find(|o| o.kind == ObjectKind::Tx)
            .ok_or_else(|| Error::InvalidState("sequence lost its transmitter".into()))?;
        let tx_id = tx.id;
        let paths = tx_paths(tx, &world.pose, channel);
        let tx_azimuth = paths.paths[0].azimuth;
        let h = synth_channel(&paths, &world.array, channel.subcarriers, Some(phase_seed ^ t as u64))?;
        let profile = power_profile(&h, &world.codebook, &channel.noise);
        let best = oracle_top_n(&profile, 1)?[0];
        let rendered = render(&world.camera, &objects, cfg.background, cfg.noise_std, &mut rng);
        if !rendered.boxes.iter().any(|(id, _)| *id == tx_id) {
            return Err(Error::InvalidState(format!("transmitter left the image at frame {t}")));
        }
        out.push(Frame {
            t,
            rendered,
            objects: objects.clone(),
            tx_id,
            tx_azimuth,
            profile,
            best,
        });
        objects = step_scene(&objects, cfg.dt, &cfg.street.bounds);
    }
    Ok(out)
}

/// Which scenario stream a sequence belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Per-frame split of the training scenario, stratified by oracle beam.
///
/// Each beam class contributes its share of the training quota (largest
/// remainder rounding), so class proportions match between the splits.
pub fn stratified_split(best: &[usize], n_train: usize, seed: u64) -> Vec<Split> {
    let n = best.len();
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &b) in best.iter().enumerate() {
        by_class.entry(b).or_default().push(i);
    }
    let ratio = n_train as f64 / n.max(1) as f64;
    let mut quota: Vec<(usize, usize, f64)> = by_class
        .iter()
        .map(|(&c, v)| {
            let exact = v.len() as f64 * ratio;
            (c, exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let mut remaining = n_train - quota.iter().map(|q| q.1).sum::<usize>();
    let mut order: Vec<usize> = (0..quota.len()).collect();
    order.sort_by(|&a, &b| quota[b].2.total_cmp(&quota[a].2).then(quota[a].0.cmp(&quota[b].0)));
    for i in order {
        if remaining == 0 {
            break;
        }
        if quota[i].1 < by_class[&quota[i].0].len() {
            quota[i].1 += 1;
            remaining -= 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = vec![Split::Test; n];
    for (c, k, _) in quota {
        let mut members = by_class[&c].clone();
        members.shuffle(&mut rng);
        for &i in &members[..k] {
            split[i] = Split::Train;
        }
    }
    split
}

/// Number of training frames for `total` frames under `cfg`.
pub fn train_count(cfg: &ExperimentConfig, total: usize) -> usize {
    cfg.train_samples
        .unwrap_or_else(|| (total as f64 * cfg.train_fraction).round() as usize)
        .min(total.saturating_sub(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub scenario: String,
    pub sequence: usize,
    pub t: usize,
    pub best: usize,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub seed: u64,
    pub train: usize,
    pub test: usize,
    pub transfer: usize,
    pub frames: Vec<ManifestEntry>,
}

/// Oracle beams of every scenario-A frame, in (sequence, t) order.
pub fn scenario_bests(world: &ScenarioWorld, cfg: &ExperimentConfig, stream: u64) -> Result<Vec<Vec<usize>>> {
    let sc = &world.config;
    super::par_map(sc.sequences, |i| {
        let frames = generate_sequence(world, &cfg.channel, sc.frames, sequence_seed(cfg.seed, stream, i))?;
        Ok(frames.iter().map(|f| f.best).collect())
    })
}

pub fn build_manifest(
    cfg: &ExperimentConfig,
    bests_a: &[Vec<usize>],
    bests_b: &[Vec<usize>],
) -> Manifest {
    let flat: Vec<usize> = bests_a.iter().flatten().copied().collect();
    let n_train = train_count(cfg, flat.len());
    let split = stratified_split(&flat, n_train, cfg.seed ^ 0x5eed);
    let mut frames = Vec::new();
    let mut k = 0;
    for (s, seq) in bests_a.iter().enumerate() {
        for (t, &best) in seq.iter().enumerate() {
            frames.push(ManifestEntry {
                scenario: cfg.scenario_a.name.clone(),
                sequence: s,
                t,
                best,
                split: split[k],
            });
            k += 1;
        }
    }
    for (s, seq) in bests_b.iter().enumerate() {
        for (t, &best) in seq.iter().enumerate() {
            frames.push(ManifestEntry {
                scenario: cfg.scenario_b.name.clone(),
                sequence: s,
                t,
                best,
                split: Split::Test,
            });
        }
    }
    let b_total: usize = bests_b.iter().map(Vec::len).sum();
    Manifest {
        schema_version: super::config::SCHEMA_VERSION,
        seed: cfg.seed,
        train: n_train,
        test: flat.len() - n_train,
        transfer: b_total,
        frames,
    }
}

fn write_sequence_dir(dir: &Path, frames: &[Frame]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut ann = Vec::with_capacity(frames.len());
    for f in frames {
        write_ppm(
            BufWriter::new(File::create(dir.join(format!("frame_{:04}.ppm", f.t)))?),
            &f.rendered.image,
        )?;
        ann.push(FrameAnnotation {
            t: f.t,
            boxes: f.rendered.boxes.iter().map(|(id, b)| BoxAnnotation::new(*id, b)).collect(),
            tx_id: f.tx_id,
            tx_azimuth: f.tx_azimuth,
        });
    }
    let rows: Vec<(u64, &PowerProfile)> = frames.iter().map(|f| (f.t as u64, &f.profile)).collect();
    let mut w = BufWriter::new(File::create(dir.join("profiles.csv"))?);
    write_profiles_csv(&mut w, &rows)?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(dir.join("annotations.jsonl"))?);
    write_jsonl(&mut w, &ann)?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(dir.join("oracle.csv"))?);
    writeln!(w, "t,best")?;
    for f in frames {
        writeln!(w, "{},{}", f.t, f.best)?;
    }
    w.flush()?;
    Ok(())
}

/// Write both scenarios and the split manifest under `out`.
pub fn generate_dataset(cfg: &ExperimentConfig, out: &Path) -> Result<Manifest> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let wa = ScenarioWorld::build(&cfg.scenario_a, &cfg.channel)?;
    let wb = ScenarioWorld::build(&cfg.scenario_b, &cfg.channel)?;
    let mut bests = Vec::new();
    for (world, stream) in [(&wa, STREAM_A), (&wb, STREAM_B)] {
        let sc = &world.config;
        let per_seq = super::par_map(sc.sequences, |i| {
            let frames = generate_sequence(world, &cfg.channel, sc.frames, sequence_seed(cfg.seed, stream, i))?;
            write_sequence_dir(&out.join(&sc.name).join(format!("seq_{i:04}")), &frames)?;
            Ok(frames.iter().map(|f| f.best).collect::<Vec<_>>())
        })?;
        bests.push(per_seq);
    }
    let manifest = build_manifest(cfg, &bests[0], &bests[1]);
    let mut w = BufWriter::new(File::create(out.join("manifest.json"))?);
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    w.write_all(b"\n")?;
    w.flush()?;
    fs::write(out.join("config.json"), cfg.to_json() + "\n")?;
    Ok(manifest)
}
