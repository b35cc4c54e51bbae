use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::ColumnMap;
use crate::scene::Point2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionVariant {
    /// Full-height column strips.
    Strip,
    /// Wedges converging on the vertical vanishing point.
    Fan,
}

/// Image area covered by one beam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamRegion {
    pub beam: usize,
    /// Convex polygon vertices; empty when the beam has no pixels.
    pub polygon: Vec<Point2>,
    pub variant: RegionVariant,
}

impl BeamRegion {
    /// Even-odd crossing test; points on the lower or left edge count as inside.
    pub fn contains(&self, p: Point2) -> bool {
        let n = self.polygon.len();
        if n < 3 {
            return false;
        }
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let (a, b) = (self.polygon[i], self.polygon[j]);
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if p[0] < x {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    /// Bounding box of the polygon as `(x0, y0, x1, y1)`.
    pub fn bounds(&self) -> Option<[f64; 4]> {
        if self.polygon.is_empty() {
            return None;
        }
        let mut b = [f64::MAX, f64::MAX, f64::MIN, f64::MIN];
        for p in &self.polygon {
            b[0] = b[0].min(p[0]);
            b[1] = b[1].min(p[1]);
            b[2] = b[2].max(p[0]);
            b[3] = b[3].max(p[1]);
        }
        Some(b)
    }
}

pub fn beam_region_strip(q: usize, colmap: &ColumnMap) -> BeamRegion {
    let iv = colmap.interval(q);
    let (x0, x1, h) = (iv.start as f64, iv.end as f64, colmap.height as f64);
    let polygon = if iv.is_empty() {
        Vec::new()
    } else {
        vec![[x0, 0.0], [x1, 0.0], [x1, h], [x0, h]]
    };
    BeamRegion {
        beam: q,
        polygon,
        variant: RegionVariant::Strip,
    }
}

/// Clip a polygon to the half-plane `keep(p) >= 0` where `keep` is affine.
fn clip_half_plane(poly: &[Point2], keep: impl Fn(Point2) -> f64) -> Vec<Point2> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        let (fa, fb) = (keep(a), keep(b));
        if fa >= 0.0 {
            out.push(a);
        }
        if (fa >= 0.0) != (fb >= 0.0) {
            let t = fa / (fa - fb);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

/// Wedge between the lines joining `vp` to beam `q`'s column edges on the
/// anchor row, clipped to the image.
pub fn beam_region_fan(q: usize, colmap: &ColumnMap, vp: Point2) -> Result<BeamRegion> {
    let (w, h) = (colmap.width as f64, colmap.height as f64);
    if !vp[0].is_finite() || !vp[1].is_finite() {
        return Err(Error::DegenerateGeometry("vanishing point is not finite".into()));
    }
    if (0.0..=h).contains(&vp[1]) {
        return Err(Error::DegenerateGeometry(
            "vanishing point lies inside the image rows".into(),
        ));
    }
    let iv = colmap.interval(q);
    if iv.is_empty() {
        return Ok(BeamRegion {
            beam: q,
            polygon: Vec::new(),
            variant: RegionVariant::Fan,
        });
    }
    let ya = colmap.anchor_row;
    // Column where the line from vp through (x, ya) meets row y.
    let at_row = |x: f64, y: f64| vp[0] + (x - vp[0]) * (y - vp[1]) / (ya - vp[1]);
    let (x0, x1) = (iv.start as f64, iv.end as f64);
    let quad = vec![
        [at_row(x0, 0.0), 0.0],
        [at_row(x1, 0.0), 0.0],
        [at_row(x1, h), h],
        [at_row(x0, h), h],
    ];
    let mut poly = clip_half_plane(&quad, |p| p[0]);
    poly = clip_half_plane(&poly, |p| w - p[0]);
    Ok(BeamRegion {
        beam: q,
        polygon: poly,
        variant: RegionVariant::Fan,
    })
}

/// Regions for every beam of `colmap`.
pub fn beam_regions(
    colmap: &ColumnMap,
    variant: RegionVariant,
    vp: Option<Point2>,
) -> Result<Vec<BeamRegion>> {
    (0..colmap.num_beams())
        .map(|q| match variant {
            RegionVariant::Strip => Ok(beam_region_strip(q, colmap)),
            RegionVariant::Fan => {
                let vp = vp.ok_or_else(|| {
                    Error::InvalidArgument("fan regions need a vanishing point".into())
                })?;
                beam_region_fan(q, colmap, vp)
            }
        })
        .collect()
}

/// SVG overlay of the region outlines; regions whose bit is set are filled.
pub fn regions_svg(regions: &[BeamRegion], width: usize, height: usize, fill: &[bool]) -> String {
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    );
    s.push_str(&format!(
        "<rect width=\"{width}\" height=\"{height}\" fill=\"#1c1e26\"/>\n"
    ));
    for r in regions {
        if r.polygon.is_empty() {
            continue;
        }
        let pts: Vec<String> = r
            .polygon
            .iter()
            .map(|p| format!("{:.2},{:.2}", p[0], p[1]))
            .collect();
        let on = fill.get(r.beam).copied().unwrap_or(false);
        s.push_str(&format!(
            "<polygon data-beam=\"{}\" points=\"{}\" fill=\"{}\" fill-opacity=\"0.5\" stroke=\"#9ab\" stroke-width=\"0.5\"/>\n",
            r.beam,
            pts.join(" "),
            if on { "#f5b942" } else { "none" }
        ));
    }
    s.push_str("</svg>\n");
    s
}
