//! Flat-shaded box rasterizer.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::camera::{dot, sub, Camera, Point2, Vec3};
use super::world::{ObjectKind, WorldObject};
use crate::bbox::BBox;

/// Label value for pixels not covered by any object.
pub const BACKGROUND: u32 = u32::MAX;

/// Interleaved 8-bit RGB image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&color);
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn pixel(&self, col: usize, row: usize) -> [u8; 3] {
        let i = 3 * (row * self.width + col);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, col: usize, row: usize, c: [u8; 3]) {
        let i = 3 * (row * self.width + col);
        self.data[i..i + 3].copy_from_slice(&c);
    }

    pub fn is_zero_at(&self, col: usize, row: usize) -> bool {
        self.pixel(col, row) == [0, 0, 0]
    }
}

/// One rendered frame: image, per-pixel object labels and ground-truth boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub image: RgbImage,
    /// Object id per pixel, [`BACKGROUND`] where nothing was drawn.
    pub labels: Vec<u32>,
    /// Boxes of vehicles whose projection intersects the image.
    pub boxes: Vec<(u32, BBox)>,
}

// Faces as corner-index quads (see `WorldObject::corners`) with outward normals.
const FACES: [([usize; 4], Vec3); 6] = [
    ([0, 2, 6, 4], [-1.0, 0.0, 0.0]),
    ([1, 5, 7, 3], [1.0, 0.0, 0.0]),
    ([0, 4, 5, 1], [0.0, -1.0, 0.0]),
    ([2, 3, 7, 6], [0.0, 1.0, 0.0]),
    ([0, 1, 3, 2], [0.0, 0.0, -1.0]),
    ([4, 6, 7, 5], [0.0, 0.0, 1.0]),
];

fn shade(normal: Vec3) -> f64 {
    if normal[1] != 0.0 {
        1.0
    } else if normal[2] != 0.0 {
        0.85
    } else {
        0.7
    }
}

/// True when `p` lies inside the convex polygon `poly` (either winding).
pub(crate) fn inside_convex(poly: &[Point2], p: Point2) -> bool {
    let n = poly.len();
    let mut sign = 0.0f64;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let c = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        if c == 0.0 {
            continue;
        }
        if sign == 0.0 {
            sign = c.signum();
        } else if c.signum() != sign {
            return false;
        }
    }
    true
}

fn fill_convex(
    poly: &[Point2],
    width: usize,
    height: usize,
    mut paint: impl FnMut(usize, usize),
) {
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in poly {
        x0 = x0.min(p[0]);
        y0 = y0.min(p[1]);
        x1 = x1.max(p[0]);
        y1 = y1.max(p[1]);
    }
    let (cols, rows) = BBox::from_corners(x0, y0, x1, y1).pixel_ranges(width, height);
    for row in rows {
        for col in cols.clone() {
            if inside_convex(poly, [col as f64 + 0.5, row as f64 + 0.5]) {
                paint(col, row);
            }
        }
    }
}

/// Draw `objects` far-to-near and add Gaussian grain of `noise_std` gray levels.
pub fn render<R: Rng + ?Sized>(
    camera: &Camera,
    objects: &[WorldObject],
    background: [u8; 3],
    noise_std: f64,
    rng: &mut R,
) -> Rendered {
    let (w, h) = (camera.width_px, camera.height_px);
    let mut image = RgbImage::filled(w, h, background);
    let mut labels = vec![BACKGROUND; w * h];
    let mut boxes = Vec::new();

    let cam_pos = camera.position();
    let mut order: Vec<(f64, &WorldObject)> = objects
        .iter()
        .map(|o| (camera.to_camera(o.position)[2], o))
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.id.cmp(&b.1.id)));

    for (_, obj) in order {
        let corners = obj.corners();
        let projected: Option<Vec<Point2>> = corners.iter().map(|&c| camera.project(c)).collect();
        let Some(projected) = projected else {
            continue;
        };
        for (quad, normal) in FACES {
            let center = {
                let mut c = [0.0; 3];
                for &i in &quad {
                    for a in 0..3 {
                        c[a] += 0.25 * corners[i][a];
                    }
                }
                c
            };
            if dot(normal, sub(cam_pos, center)) <= 0.0 {
                continue;
            }
            let k = shade(normal);
            let color = obj.color.map(|v| (v as f64 * k).round() as u8);
            let poly: Vec<Point2> = quad.iter().map(|&i| projected[i]).collect();
            fill_convex(&poly, w, h, |col, row| {
                image.set_pixel(col, row, color);
                labels[row * w + col] = obj.id;
            });
        }
        if obj.kind != ObjectKind::Pole {
            let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
            for p in &projected {
                x0 = x0.min(p[0]);
                y0 = y0.min(p[1]);
                x1 = x1.max(p[0]);
                y1 = y1.max(p[1]);
            }
            if let Some(b) = BBox::from_corners(x0, y0, x1, y1).clip(w, h) {
                boxes.push((obj.id, b));
            }
        }
    }
    boxes.sort_by_key(|(id, _)| *id);

    if noise_std > 0.0 {
        let normal = Normal::new(0.0, noise_std).expect("finite noise std");
        for v in image.data.iter_mut() {
            let n: f64 = normal.sample(rng);
            *v = (*v as f64 + n).round().clamp(0.0, 255.0) as u8;
        }
    }
    Rendered {
        image,
        labels,
        boxes,
    }
}
