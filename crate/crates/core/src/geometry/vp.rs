use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{Camera, ObjectKind, Point2, WorldObject};

/// Image line segment between two pixel points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Point2,
    pub b: Point2,
}

impl Segment {
    pub fn new(a: Point2, b: Point2) -> Self {
        Self { a, b }
    }

    /// Unit normal `n` and offset `c` with `n . p + c = 0` on the support line.
    fn normal_form(&self) -> Option<(Vector2<f64>, f64)> {
        let d = Vector2::new(self.b[0] - self.a[0], self.b[1] - self.a[1]);
        let len = d.norm();
        if !(len > 1e-9) {
            return None;
        }
        let n = Vector2::new(-d[1], d[0]) / len;
        Some((n, -n.dot(&Vector2::new(self.a[0], self.a[1]))))
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self::new([self.a[0] + dx, self.a[1] + dy], [self.b[0] + dx, self.b[1] + dy])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VanishingPoint {
    pub vp: Point2,
    /// Mean squared distance from `vp` to the segment support lines.
    pub residual: f64,
}

/// Least-squares intersection of the segments' support lines.
pub fn estimate_vp(segments: &[Segment]) -> Result<VanishingPoint> {
    let lines: Vec<(Vector2<f64>, f64)> = segments.iter().filter_map(Segment::normal_form).collect();
    if lines.len() < 2 {
        return Err(Error::NoVanishingPoint("fewer than two usable segments".into()));
    }
    // Center the problem on the segment midpoints so conditioning does not
    // depend on where the image origin is.
    let k = segments.len() as f64;
    let origin = segments.iter().fold(Vector2::zeros(), |acc, s| {
        acc + Vector2::new(0.5 * (s.a[0] + s.b[0]), 0.5 * (s.a[1] + s.b[1]))
    }) / k;
    let mut a = Matrix2::zeros();
    let mut rhs = Vector2::zeros();
    for (n, c) in &lines {
        let c0 = c + n.dot(&origin);
        a += n * n.transpose();
        rhs -= n * c0;
    }
    let eig = a.symmetric_eigen().eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > 1e-10 * hi) {
        return Err(Error::NoVanishingPoint("segments are parallel".into()));
    }
    let p = a
        .try_inverse()
        .ok_or_else(|| Error::NoVanishingPoint("singular normal equations".into()))?
        * rhs
        + origin;
    let residual = lines
        .iter()
        .map(|(n, c)| (n.dot(&p) + c).powi(2))
        .sum::<f64>()
        / lines.len() as f64;
    Ok(VanishingPoint {
        vp: [p[0], p[1]],
        residual,
    })
}

/// Projected center lines of every pole that is at least partly in view.
pub fn pole_edge_segments(camera: &Camera, objects: &[WorldObject]) -> Vec<Segment> {
    let (w, h) = (camera.width_px as f64, camera.height_px as f64);
    let in_view = |p: Point2| (0.0..=w).contains(&p[0]) && (0.0..=h).contains(&p[1]);
    objects
        .iter()
        .filter(|o| o.kind == ObjectKind::Pole)
        .filter_map(|o| {
            let [x, y, z] = o.position;
            let half = 0.5 * o.size[1];
            let a = camera.project([x, y - half, z])?;
            let b = camera.project([x, y + half, z])?;
            (in_view(a) || in_view(b)).then(|| Segment::new(a, b))
        })
        .collect()
}
