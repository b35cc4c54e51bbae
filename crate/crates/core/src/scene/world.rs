use rand::Rng;
use serde::{Deserialize, Serialize};

use super::camera::{Camera, Vec3};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectKind {
    Tx,
    Distractor,
    Pole,
}

/// Axis-aligned box in the world, `position` is its centroid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldObject {
    pub id: u32,
    pub kind: ObjectKind,
    pub position: Vec3,
    pub size: Vec3,
    pub velocity: Vec3,
    pub color: [u8; 3],
}

impl WorldObject {
    pub fn new(id: u32, kind: ObjectKind, position: Vec3, size: Vec3) -> Result<Self> {
        if size.iter().any(|s| !(*s > 0.0)) {
            return invalid("object size must be positive");
        }
        if kind == ObjectKind::Pole && (size[0] > 0.25 * size[1] || size[2] > 0.25 * size[1]) {
            return invalid("poles must be tall and thin");
        }
        Ok(Self {
            id,
            kind,
            position,
            size,
            velocity: [0.0; 3],
            color: [200, 200, 200],
        })
    }

    pub fn with_velocity(mut self, v: Vec3) -> Self {
        self.velocity = v;
        self
    }

    pub fn with_color(mut self, c: [u8; 3]) -> Self {
        self.color = c;
        self
    }

    /// Corner `i` has bit 0 → +x, bit 1 → +y, bit 2 → +z.
    pub fn corners(&self) -> [Vec3; 8] {
        let mut out = [[0.0; 3]; 8];
        for (i, c) in out.iter_mut().enumerate() {
            for axis in 0..3 {
                let sign = if i >> axis & 1 == 1 { 0.5 } else { -0.5 };
                c[axis] = self.position[axis] + sign * self.size[axis];
            }
        }
        out
    }

    pub fn is_vehicle(&self) -> bool {
        self.kind != ObjectKind::Pole
    }
}

/// What happens to objects that drive past the street ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeMode {
    Wrap,
    Despawn,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreetBounds {
    pub x_min: f64,
    pub x_max: f64,
    pub mode: EdgeMode,
}

impl StreetBounds {
    pub fn free() -> Self {
        Self {
            x_min: f64::NEG_INFINITY,
            x_max: f64::INFINITY,
            mode: EdgeMode::Free,
        }
    }
}

/// Advance every object by `dt` seconds at constant velocity.
pub fn step_scene(objects: &[WorldObject], dt: f64, bounds: &StreetBounds) -> Vec<WorldObject> {
    let span = bounds.x_max - bounds.x_min;
    objects
        .iter()
        .filter_map(|o| {
            let mut o = o.clone();
            for axis in 0..3 {
                o.position[axis] += o.velocity[axis] * dt;
            }
            let x = o.position[0];
            let outside = x < bounds.x_min || x > bounds.x_max;
            match bounds.mode {
                EdgeMode::Free => Some(o),
                _ if !outside => Some(o),
                EdgeMode::Despawn => None,
                EdgeMode::Wrap => {
                    o.position[0] = bounds.x_min + (x - bounds.x_min).rem_euclid(span);
                    Some(o)
                }
            }
        })
        .collect()
}

/// Pose of the base-station array: position and boresight yaw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsPose {
    pub position: Vec3,
    pub yaw: f64,
}

impl From<&Camera> for BsPose {
    fn from(c: &Camera) -> Self {
        Self {
            position: c.position(),
            yaw: c.yaw,
        }
    }
}

/// Horizontal angle of a point relative to the array boresight.
pub fn azimuth_of(p: Vec3, pose: &BsPose) -> f64 {
    let dx = p[0] - pose.position[0];
    let dz = p[2] - pose.position[2];
    let (s, c) = pose.yaw.sin_cos();
    let x = dx * c - dz * s;
    let z = dx * s + dz * c;
    x.atan2(z)
}

/// Azimuth of the transmitter centroid.
pub fn tx_azimuth(objects: &[WorldObject], pose: &BsPose) -> Result<f64> {
    let tx = objects
        .iter()
        .find(|o| o.kind == ObjectKind::Tx)
        .ok_or_else(|| Error::InvalidState("scene has no transmitter".into()))?;
    Ok(azimuth_of(tx.position, pose))
}

/// A straight lane on the ground plane, parallel to the x axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    /// Distance of the lane center line from the camera along z.
    pub depth_m: f64,
    /// +1 drives toward +x, -1 toward -x.
    pub direction: f64,
}

/// Parameters of the synthetic street.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreetConfig {
    pub lanes: Vec<Lane>,
    pub speed_mps: [f64; 2],
    pub vehicle_length_m: [f64; 2],
    pub vehicle_width_m: [f64; 2],
    pub vehicle_height_m: [f64; 2],
    /// Vehicles per scene including the transmitter.
    pub vehicles: usize,
    /// Spawned vehicles stay within this azimuth half-width for the whole sequence.
    pub max_azimuth_deg: f64,
    /// Pairwise centroid azimuth separation kept over the first `separation_frames` frames.
    pub min_separation_deg: f64,
    pub separation_frames: usize,
    /// Pole x positions; poles stand at `pole_depth_m`.
    pub pole_x_m: Vec<f64>,
    pub pole_depth_m: f64,
    pub pole_height_m: f64,
    pub bounds: StreetBounds,
}

impl Default for StreetConfig {
    fn default() -> Self {
        Self {
            lanes: vec![
                Lane {
                    depth_m: 27.0,
                    direction: 1.0,
                },
                Lane {
                    depth_m: 32.0,
                    direction: -1.0,
                },
            ],
            speed_mps: [7.0, 11.0],
            vehicle_length_m: [3.8, 4.8],
            vehicle_width_m: [1.7, 1.9],
            vehicle_height_m: [1.4, 1.7],
            vehicles: 4,
            max_azimuth_deg: 40.0,
            min_separation_deg: 13.0,
            separation_frames: 6,
            pole_x_m: vec![-26.0, -9.0, 7.0, 24.0],
            pole_depth_m: 40.0,
            pole_height_m: 7.0,
            bounds: StreetBounds {
                x_min: -60.0,
                x_max: 60.0,
                mode: EdgeMode::Wrap,
            },
        }
    }
}

fn bright_color<R: Rng + ?Sized>(rng: &mut R) -> [u8; 3] {
    loop {
        let c = [rng.gen_range(60..=255u8), rng.gen_range(60..=255u8), rng.gen_range(60..=255u8)];
        let gray = 0.299 * c[0] as f64 + 0.587 * c[1] as f64 + 0.114 * c[2] as f64;
        if gray >= 150.0 {
            return c;
        }
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, range: [f64; 2]) -> f64 {
    if range[1] > range[0] {
        rng.gen_range(range[0]..range[1])
    } else {
        range[0]
    }
}

/// Spawn poles and vehicles for one sequence of `frames` frames at step `dt`.
///
/// Vehicles are drawn from one distribution; the transmitter is then picked
/// uniformly among them, so it is statistically indistinguishable from the
/// distractors by appearance or placement.
pub fn spawn_scene<R: Rng + ?Sized>(
    cfg: &StreetConfig,
    frames: usize,
    dt: f64,
    pose: &BsPose,
    rng: &mut R,
) -> Result<Vec<WorldObject>> {
    if cfg.lanes.is_empty() || cfg.vehicles == 0 {
        return invalid("street needs lanes and at least one vehicle");
    }
    let max_az = cfg.max_azimuth_deg.to_radians();
    let min_sep = cfg.min_separation_deg.to_radians();
    let horizon = (frames.max(1) - 1) as f64 * dt;
    let check_t = cfg.separation_frames.min(frames.max(1) - 1) as f64 * dt;

    let mut objects = Vec::new();
    let mut next_id = 1u32;
    for &x in &cfg.pole_x_m {
        let size = [0.3, cfg.pole_height_m, 0.3];
        let p = WorldObject::new(
            next_id,
            ObjectKind::Pole,
            [x, 0.5 * cfg.pole_height_m, cfg.pole_depth_m],
            size,
        )?
        .with_color([70, 70, 74]);
        objects.push(p);
        next_id += 1;
    }

    let mut vehicles: Vec<WorldObject> = Vec::with_capacity(cfg.vehicles);
    let mut attempts = 0;
    let first_vehicle_id = next_id;
    while vehicles.len() < cfg.vehicles {
        attempts += 1;
        if attempts > 100_000 {
            return Err(Error::InvalidState(
                "could not place vehicles with the requested separation".into(),
            ));
        }
        // Start over when earlier placements leave no room.
        if attempts % 500 == 0 {
            vehicles.clear();
            next_id = first_vehicle_id;
        }
        let lane = cfg.lanes[rng.gen_range(0..cfg.lanes.len())];
        let speed = uniform(rng, cfg.speed_mps) * lane.direction;
        let size = [
            uniform(rng, cfg.vehicle_length_m),
            uniform(rng, cfg.vehicle_height_m),
            uniform(rng, cfg.vehicle_width_m),
        ];
        let x_lim = lane.depth_m * max_az.tan();
        let x0 = rng.gen_range(-x_lim..x_lim);
        let start = [x0, 0.5 * size[1], lane.depth_m];
        let end_x = x0 + speed * horizon;
        if azimuth_of([end_x, start[1], start[2]], pose).abs() > max_az
            || azimuth_of(start, pose).abs() > max_az
        {
            continue;
        }
        let az_at = |x: f64, v: f64, z: f64, t: f64| azimuth_of([x + v * t, 0.0, z], pose);
        let steps = cfg.separation_frames.max(1);
        let separated = vehicles.iter().all(|o| {
            (0..=steps).all(|i| {
                let t = check_t * i as f64 / steps as f64;
                let a = az_at(x0, speed, lane.depth_m, t);
                let b = az_at(o.position[0], o.velocity[0], o.position[2], t);
                (a - b).abs() >= min_sep
            })
        });
        if !separated {
            continue;
        }
        let v = WorldObject::new(next_id, ObjectKind::Distractor, start, size)?
            .with_velocity([speed, 0.0, 0.0])
            .with_color(bright_color(rng));
        next_id += 1;
        vehicles.push(v);
    }
    let tx = rng.gen_range(0..vehicles.len());
    vehicles[tx].kind = ObjectKind::Tx;
    objects.extend(vehicles);
    Ok(objects)
}
