//! Detector input: visual plane, rasterized beam power plane, zero plane.

use std::io::{BufRead, Write};
use std::ops::Range;

use crate::channel::{Codebook, PowerProfile};
use crate::error::{invalid, Error, Result};
use crate::scene::io::{header_token, header_usize};
use crate::scene::{Camera, Plane, VisualMode};

/// Pixel-column interval of every beam along the anchor row.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMap {
    /// `Q + 1` non-decreasing integer edges; beam `q` owns `edges[q]..edges[q+1]`.
    pub edges: Vec<usize>,
    /// Unclipped sub-pixel boundary positions, one per edge.
    pub boundary_x: Vec<f64>,
    pub anchor_row: f64,
    pub width: usize,
    pub height: usize,
}

impl ColumnMap {
    pub fn num_beams(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn interval(&self, q: usize) -> Range<usize> {
        self.edges[q]..self.edges[q + 1]
    }

    /// Beam owning pixel column `col`, if any.
    pub fn beam_of_column(&self, col: usize) -> Option<usize> {
        if col < self.edges[0] || col >= *self.edges.last()? {
            return None;
        }
        Some(self.edges.partition_point(|&e| e <= col) - 1)
    }
}

/// Map each beam's azimuth span to pixel columns where its boundary planes
/// cross the anchor row (the bottom pixel row).
pub fn beam_column_map(cb: &Codebook, camera: &Camera) -> Result<ColumnMap> {
    let (w, h) = (camera.width_px, camera.height_px);
    let anchor_row = h as f64 - 0.5;
    let mut azimuths = Vec::with_capacity(cb.len() + 1);
    azimuths.push(cb.spans[0].lo);
    azimuths.extend(cb.spans.iter().map(|s| s.hi));
    let boundary_x: Vec<f64> = azimuths
        .iter()
        .map(|&a| {
            camera
                .column_at_row(a, anchor_row)
                .unwrap_or(if a < 0.0 { f64::NEG_INFINITY } else { f64::INFINITY })
        })
        .collect();
    let mut edges = Vec::with_capacity(boundary_x.len());
    let mut prev = 0usize;
    for &x in &boundary_x {
        // First column whose center is at or right of the boundary.
        let e = if x.is_nan() {
            prev
        } else {
            (x - 0.5).ceil().clamp(0.0, w as f64) as usize
        };
        let e = e.max(prev);
        edges.push(e);
        prev = e;
    }
    if edges[0] == *edges.last().unwrap() {
        return invalid("codebook sector does not overlap the camera view");
    }
    Ok(ColumnMap {
        edges,
        boundary_x,
        anchor_row,
        width: w,
        height: h,
    })
}

/// Fill every beam's columns with its power normalized by the frame maximum.
pub fn rasterize_profile(profile: &PowerProfile, colmap: &ColumnMap) -> Result<Plane> {
    if profile.len() != colmap.num_beams() {
        return invalid("profile length does not match the column map");
    }
    if (0..colmap.num_beams()).any(|q| colmap.interval(q).is_empty()) {
        return invalid("column map leaves a beam without columns");
    }
    let (w, h) = (colmap.width, colmap.height);
    let max = profile.max();
    let mut row = vec![0.0f32; w];
    if max > 0.0 {
        for q in 0..profile.len() {
            let v = (profile.powers[q] / max) as f32;
            for c in colmap.interval(q) {
                row[c] = v;
            }
        }
    }
    let mut data = Vec::with_capacity(w * h);
    for _ in 0..h {
        data.extend_from_slice(&row);
    }
    Ok(Plane {
        width: w,
        height: h,
        data,
    })
}

/// Three 8-bit planes: visual, power, zeros.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FusedImage {
    pub width: usize,
    pub height: usize,
    pub planes: [Vec<u8>; 3],
    pub mode: VisualMode,
}

fn quantize(p: &Plane) -> Vec<u8> {
    p.data
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect()
}

impl FusedImage {
    pub fn value(&self, plane: usize, col: usize, row: usize) -> f32 {
        self.planes[plane][row * self.width + col] as f32 / 255.0
    }

    pub fn plane_sum(&self, plane: usize) -> u64 {
        self.planes[plane].iter().map(|&v| v as u64).sum()
    }

    /// Same image with the power plane replaced by zeros.
    pub fn without_power(&self) -> FusedImage {
        let mut out = self.clone();
        out.planes[1].iter_mut().for_each(|v| *v = 0);
        out
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "BSFUSED mode={}", self.mode.name())?;
        for p in &self.planes {
            write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
            w.write_all(p)?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(mut r: R) -> Result<Self> {
        let mut header = String::new();
        r.read_line(&mut header)?;
        let mode = header
            .trim()
            .strip_prefix("BSFUSED mode=")
            .and_then(VisualMode::parse)
            .ok_or_else(|| Error::Format(format!("bad fused header {header:?}")))?;
        let mut planes: [Vec<u8>; 3] = Default::default();
        let (mut width, mut height) = (0, 0);
        for (i, plane) in planes.iter_mut().enumerate() {
            if header_token(&mut r)? != "P5" {
                return Err(Error::Format("expected P5 plane".into()));
            }
            let (pw, ph) = (header_usize(&mut r)?, header_usize(&mut r)?);
            if header_usize(&mut r)? != 255 {
                return Err(Error::Format("only maxval 255 is supported".into()));
            }
            if i > 0 && (pw, ph) != (width, height) {
                return Err(Error::Format("plane size mismatch".into()));
            }
            (width, height) = (pw, ph);
            let mut data = vec![0u8; pw * ph];
            r.read_exact(&mut data)?;
            *plane = data;
        }
        Ok(Self {
            width,
            height,
            planes,
            mode,
        })
    }
}

/// Stack the visual and power planes over an all-zero third plane.
pub fn fuse(visual: &Plane, power: &Plane, mode: VisualMode) -> Result<FusedImage> {
    if (visual.width, visual.height) != (power.width, power.height) {
        return invalid("visual and power planes differ in size");
    }
    Ok(FusedImage {
        width: visual.width,
        height: visual.height,
        planes: [
            quantize(visual),
            quantize(power),
            vec![0; visual.width * visual.height],
        ],
        mode,
    })
}
