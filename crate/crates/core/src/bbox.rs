use serde::{Deserialize, Serialize};

/// Axis-aligned box in pixel coordinates, stored as center and extents.
///
/// Pixel `(col, row)` covers `[col, col+1) x [row, row+1)`; a pixel belongs to
/// the box when its center lies in the half-open box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn from_corners(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self {
            x: 0.5 * (x0 + x1),
            y: 0.5 * (y0 + y1),
            w: x1 - x0,
            h: y1 - y0,
        }
    }

    pub fn x0(&self) -> f64 {
        self.x - 0.5 * self.w
    }
    pub fn x1(&self) -> f64 {
        self.x + 0.5 * self.w
    }
    pub fn y0(&self) -> f64 {
        self.y - 0.5 * self.h
    }
    pub fn y1(&self) -> f64 {
        self.y + 0.5 * self.h
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x1().min(other.x1()) - self.x0().max(other.x0());
        let h = self.y1().min(other.y1()) - self.y0().max(other.y0());
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// Intersection over union; 0 for disjoint or empty boxes.
    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection_area(other);
        if inter <= 0.0 {
            return 0.0;
        }
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            (inter / union).clamp(0.0, 1.0)
        }
    }

    /// Clip to `[0, width] x [0, height]`; `None` when nothing is left.
    pub fn clip(&self, width: usize, height: usize) -> Option<BBox> {
        let x0 = self.x0().max(0.0);
        let y0 = self.y0().max(0.0);
        let x1 = self.x1().min(width as f64);
        let y1 = self.y1().min(height as f64);
        (x1 > x0 && y1 > y0).then(|| BBox::from_corners(x0, y0, x1, y1))
    }

    /// Half-open column and row index ranges of the pixels whose centers fall
    /// inside the box, clipped to the image.
    pub fn pixel_ranges(
        &self,
        width: usize,
        height: usize,
    ) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let first = |lo: f64, n: usize| ((lo - 0.5).ceil().max(0.0) as usize).min(n);
        (
            first(self.x0(), width)..first(self.x1(), width),
            first(self.y0(), height)..first(self.y1(), height),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.w.is_finite() && self.h.is_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iou_basic_cases() {
        let a = BBox::new(1.0, 1.0, 2.0, 2.0);
        assert_eq!(a.iou(&a), 1.0);
        assert_eq!(a.iou(&BBox::new(10.0, 10.0, 2.0, 2.0)), 0.0);
        let b = BBox::new(2.0, 1.0, 2.0, 2.0);
        assert!((a.iou(&b) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn pixel_ranges_use_centers() {
        let b = BBox::from_corners(1.2, 0.0, 3.5, 2.6);
        let (cols, rows) = b.pixel_ranges(10, 10);
        // centers 1.5, 2.5 are inside; 3.5 is on the open edge
        assert_eq!(cols, 1..3);
        assert_eq!(rows, 0..3);
        let (c2, _) = BBox::from_corners(-5.0, 0.0, 100.0, 1.0).pixel_ranges(8, 8);
        assert_eq!(c2, 0..8);
    }
}
