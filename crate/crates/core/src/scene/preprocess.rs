use serde::{Deserialize, Serialize};

use super::render::{RgbImage, BACKGROUND};
use crate::error::{invalid, Result};

/// How the visual plane of the detector input is prepared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VisualMode {
    /// Grayscale of the original frame.
    Rgb,
    /// Background removed, colors removed: binary silhouettes.
    Method1,
    /// Background, colors and shapes removed: an empty plane.
    Method2,
}

impl VisualMode {
    pub fn name(&self) -> &'static str {
        match self {
            VisualMode::Rgb => "rgb",
            VisualMode::Method1 => "method1",
            VisualMode::Method2 => "method2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rgb" => Some(VisualMode::Rgb),
            "method1" => Some(VisualMode::Method1),
            "method2" => Some(VisualMode::Method2),
            _ => None,
        }
    }
}

/// Single-channel image with values in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl Plane {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn at(&self, col: usize, row: usize) -> f32 {
        self.data[row * self.width + col]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }

    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0.0).count()
    }
}

pub fn grayscale(image: &RgbImage) -> Plane {
    let data = image
        .data
        .chunks_exact(3)
        .map(|p| (0.299 * p[0] as f32 + 0.587 * p[1] as f32 + 0.114 * p[2] as f32) / 255.0)
        .collect();
    Plane {
        width: image.width,
        height: image.height,
        data,
    }
}

/// Build the visual plane. Object pixels are known from the renderer's label
/// map; `is_foreground(label)` decides which labels count as objects (static
/// scenery such as poles is treated as background).
pub fn preprocess(
    image: &RgbImage,
    labels: &[u32],
    is_foreground: impl Fn(u32) -> bool,
    mode: VisualMode,
) -> Result<Plane> {
    if labels.len() != image.width * image.height {
        return invalid("label map does not match image size");
    }
    Ok(match mode {
        VisualMode::Rgb => grayscale(image),
        VisualMode::Method2 => Plane::zeros(image.width, image.height),
        VisualMode::Method1 => Plane {
            width: image.width,
            height: image.height,
            data: labels
                .iter()
                .map(|&l| if l != BACKGROUND && is_foreground(l) { 1.0 } else { 0.0 })
                .collect(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::camera::Camera;
    use crate::scene::render::render;
    use crate::scene::world::{ObjectKind, WorldObject};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scene(color: [u8; 3]) -> (crate::scene::Rendered, Camera) {
        let cam = Camera::new(150.0, 128, 96, 5.0, 0.15, 0.0).unwrap();
        let o = WorldObject::new(1, ObjectKind::Tx, [1.0, 0.8, 20.0], [4.0, 1.6, 1.8])
            .unwrap()
            .with_color(color);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        (render(&cam, &[o], [20, 20, 20], 6.0, &mut rng), cam)
    }

    #[test]
    fn method2_is_always_zero() {
        let (r, _) = scene([250, 10, 10]);
        let p = preprocess(&r.image, &r.labels, |_| true, VisualMode::Method2).unwrap();
        assert_eq!(p.sum(), 0.0);
    }

    #[test]
    fn method1_empty_scene_is_zero() {
        let cam = Camera::new(150.0, 128, 96, 5.0, 0.15, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = render(&cam, &[], [20, 20, 20], 6.0, &mut rng);
        let p = preprocess(&r.image, &r.labels, |_| true, VisualMode::Method1).unwrap();
        assert_eq!(p.count_nonzero(), 0);
    }

    #[test]
    fn method1_counts_silhouette_pixels() {
        let (r, cam) = scene([250, 10, 10]);
        let p = preprocess(&r.image, &r.labels, |_| true, VisualMode::Method1).unwrap();
        // Per-pixel oracle: rerender without noise and count non-background pixels.
        let o = WorldObject::new(1, ObjectKind::Tx, [1.0, 0.8, 20.0], [4.0, 1.6, 1.8]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let clean = render(&cam, &[o], [0, 0, 0], 0.0, &mut rng);
        let oracle = clean.image.data.chunks(3).filter(|c| c != &[0, 0, 0]).count();
        assert!(oracle > 0);
        assert_eq!(p.count_nonzero(), oracle);
    }

    #[test]
    fn method1_ignores_color() {
        let (a, _) = scene([250, 10, 10]);
        let (b, _) = scene([10, 200, 90]);
        let pa = preprocess(&a.image, &a.labels, |_| true, VisualMode::Method1).unwrap();
        let pb = preprocess(&b.image, &b.labels, |_| true, VisualMode::Method1).unwrap();
        assert_eq!(pa, pb);
    }

    #[test]
    fn rgb_is_grayscale() {
        let (r, _) = scene([250, 10, 10]);
        let p = preprocess(&r.image, &r.labels, |_| true, VisualMode::Rgb).unwrap();
        let px = r.image.pixel(5, 7);
        let want = (0.299 * px[0] as f32 + 0.587 * px[1] as f32 + 0.114 * px[2] as f32) / 255.0;
        assert_eq!(p.at(5, 7), want);
    }
}
