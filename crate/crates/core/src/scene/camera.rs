//! Pinhole camera co-located with the base-station array.
//!
//! World frame: `x` right, `y` up, `z` forward along the array boresight at
//! zero yaw. The camera sits at `(0, height_m, 0)`. Image frame: `u` right,
//! `v` down, origin at the top-left corner of the top-left pixel.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub type Vec3 = [f64; 3];
pub type Point2 = [f64; 2];

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub focal_px: f64,
    pub center_px: Point2,
    pub width_px: usize,
    pub height_px: usize,
    /// Mounting height above the ground plane.
    pub height_m: f64,
    /// Downward tilt in radians; zero means a level camera.
    pub pitch_down: f64,
    pub yaw: f64,
}

impl Camera {
    pub fn new(
        focal_px: f64,
        width_px: usize,
        height_px: usize,
        height_m: f64,
        pitch_down: f64,
        yaw: f64,
    ) -> Result<Self> {
        let cam = Self {
            focal_px,
            center_px: [width_px as f64 / 2.0, height_px as f64 / 2.0],
            width_px,
            height_px,
            height_m,
            pitch_down,
            yaw,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal_px > 0.0) {
            return invalid("focal length must be positive");
        }
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&self.pitch_down) {
            return invalid("pitch must lie in [0, pi/2)");
        }
        if self.width_px < 64 || self.height_px < 64 {
            return invalid("image must be at least 64x64");
        }
        Ok(())
    }

    pub fn position(&self) -> Vec3 {
        [0.0, self.height_m, 0.0]
    }

    /// World-frame unit vectors of the camera's right, down and forward axes.
    pub fn axes(&self) -> (Vec3, Vec3, Vec3) {
        let (sp, cp) = self.pitch_down.sin_cos();
        let (sy, cy) = self.yaw.sin_cos();
        let forward = [sy * cp, -sp, cy * cp];
        let right = [cy, 0.0, -sy];
        let down = cross(right, forward);
        (right, down, forward)
    }

    /// Rotate a world-frame direction into camera coordinates.
    pub fn rotate(&self, d: Vec3) -> Vec3 {
        let (r, dn, f) = self.axes();
        [dot(r, d), dot(dn, d), dot(f, d)]
    }

    pub fn to_camera(&self, p: Vec3) -> Vec3 {
        self.rotate(sub(p, self.position()))
    }

    fn pixel(&self, c: Vec3) -> Point2 {
        [
            self.center_px[0] + self.focal_px * c[0] / c[2],
            self.center_px[1] + self.focal_px * c[1] / c[2],
        ]
    }

    /// Project a world point; `None` when it is not in front of the camera.
    pub fn project(&self, p: Vec3) -> Option<Point2> {
        let c = self.to_camera(p);
        (c[2] > 1e-9).then(|| self.pixel(c))
    }

    /// Image of the point at infinity along `d` (either sign), `None` when `d`
    /// is parallel to the image plane.
    pub fn project_direction(&self, d: Vec3) -> Option<Point2> {
        let c = self.rotate(d);
        (c[2].abs() > 1e-12).then(|| self.pixel(c))
    }

    /// Analytic vertical vanishing point; `None` for a level camera.
    pub fn vertical_vanishing_point(&self) -> Option<Point2> {
        if self.pitch_down == 0.0 {
            return None;
        }
        self.project_direction([0.0, -1.0, 0.0])
    }

    /// Homogeneous image line `l` with `l . (u, v, 1) = 0` for the image of the
    /// vertical plane through the camera at `azimuth` from boresight.
    pub fn azimuth_line(&self, azimuth: f64) -> [f64; 3] {
        let theta = self.yaw + azimuth;
        let n = self.rotate([theta.cos(), 0.0, -theta.sin()]);
        let (f, [cx, cy]) = (self.focal_px, self.center_px);
        [n[0], n[1], f * n[2] - n[0] * cx - n[1] * cy]
    }

    /// Column where the azimuth plane crosses image row `v`.
    pub fn column_at_row(&self, azimuth: f64, v: f64) -> Option<f64> {
        let l = self.azimuth_line(azimuth);
        (l[0].abs() > 1e-12).then(|| -(l[1] * v + l[2]) / l[0])
    }

    /// Azimuth (relative to boresight) of the vertical plane through pixel `(u, v)`.
    pub fn azimuth_of_pixel(&self, u: f64, v: f64) -> f64 {
        let (r, dn, f) = self.axes();
        let x = (u - self.center_px[0]) / self.focal_px;
        let y = (v - self.center_px[1]) / self.focal_px;
        let d = [
            r[0] * x + dn[0] * y + f[0],
            r[1] * x + dn[1] * y + f[1],
            r[2] * x + dn[2] * y + f[2],
        ];
        d[0].atan2(d[2]) - self.yaw
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam(pitch_deg: f64) -> Camera {
        Camera::new(180.0, 320, 240, 6.0, pitch_deg.to_radians(), 0.0).unwrap()
    }

    #[test]
    fn optical_axis_hits_center() {
        let c = cam(12.0);
        let (_, _, f) = c.axes();
        let p = [f[0] * 20.0, 6.0 + f[1] * 20.0, f[2] * 20.0];
        let px = c.project(p).unwrap();
        assert!((px[0] - 160.0).abs() < 1e-9 && (px[1] - 120.0).abs() < 1e-9);
    }

    #[test]
    fn behind_camera_is_none() {
        assert!(cam(0.0).project([0.0, 6.0, -3.0]).is_none());
    }

    #[test]
    fn level_camera_keeps_verticals_vertical() {
        let c = cam(0.0);
        let a = c.project([3.0, 0.0, 20.0]).unwrap();
        let b = c.project([3.0, 9.0, 20.0]).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-9);
        assert!(c.vertical_vanishing_point().is_none());
    }

    #[test]
    fn pitched_projection_matches_matrix_oracle() {
        let c = cam(10.0);
        let a = 10f64.to_radians();
        // Rotation about the camera x-axis by the pitch, written out by hand.
        let oracle = |p: Vec3| {
            let (x, y, z) = (p[0], p[1] - 6.0, p[2]);
            let xc = x;
            let yc = -y * a.cos() - z * a.sin();
            let zc = -y * a.sin() + z * a.cos();
            [160.0 + 180.0 * xc / zc, 120.0 + 180.0 * yc / zc]
        };
        for p in [[4.0, 0.0, 30.0], [4.0, 7.0, 30.0], [-12.0, 3.5, 41.0]] {
            let got = c.project(p).unwrap();
            let want = oracle(p);
            assert!((got[0] - want[0]).abs() < 1e-9 && (got[1] - want[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn vertical_vp_below_image_when_pitched_down() {
        let c = cam(12.0);
        let vp = c.vertical_vanishing_point().unwrap();
        let want = 120.0 + 180.0 / 12f64.to_radians().tan();
        assert!((vp[0] - 160.0).abs() < 1e-9 && (vp[1] - want).abs() < 1e-9);
    }

    #[test]
    fn azimuth_line_contains_vertical_points() {
        let c = cam(12.0);
        let az = 0.4f64;
        let l = c.azimuth_line(az);
        for (dist, h) in [(10.0, 0.0), (25.0, 2.0), (40.0, 7.0)] {
            let p = c.project([dist * az.sin(), h, dist * az.cos()]).unwrap();
            assert!((l[0] * p[0] + l[1] * p[1] + l[2]).abs() < 1e-9);
        }
        let u = c.column_at_row(az, 200.0).unwrap();
        assert!((c.azimuth_of_pixel(u, 200.0) - az).abs() < 1e-12);
    }
}
