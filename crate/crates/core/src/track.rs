//! Constant-velocity Kalman tracking with greedy IoU association.
//!
//! State is `(cx, cy, w, h, vx, vy)` in pixels and pixels per frame; the
//! measurement is the box `(cx, cy, w, h)`.

use nalgebra::{Matrix4, Matrix4x6, Matrix6, SMatrix, Vector4, Vector6};
use serde::{Deserialize, Serialize};

use crate::bbox::BBox;
use crate::error::{invalid, Error, Result};

type Matrix6x4 = SMatrix<f64, 6, 4>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub iou_gate: f64,
    pub max_misses: usize,
    /// Acceleration noise on the centre, px/frame^2.
    pub process_noise: f64,
    /// Random-walk noise on width and height, px/frame.
    pub size_noise: f64,
    /// Measurement noise standard deviation, px.
    pub measurement_noise: f64,
    /// Initial velocity standard deviation, px/frame.
    pub init_velocity_std: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            iou_gate: 0.3,
            max_misses: 5,
            process_noise: 0.5,
            size_noise: 0.5,
            measurement_noise: 1.0,
            init_velocity_std: 5.0,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_gate > 0.0 && self.iou_gate < 1.0) {
            return invalid("IoU gate must lie in (0, 1)");
        }
        let scales = [
            self.process_noise,
            self.size_noise,
            self.measurement_noise,
            self.init_velocity_std,
        ];
        if scales.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return invalid("noise scales must be finite and non-negative");
        }
        Ok(())
    }

    fn transition() -> Matrix6<f64> {
        let mut f = Matrix6::identity();
        f[(0, 4)] = 1.0;
        f[(1, 5)] = 1.0;
        f
    }

    fn process_cov(&self) -> Matrix6<f64> {
        // Piecewise-constant acceleration on each centre axis.
        let q = self.process_noise * self.process_noise;
        let mut m = Matrix6::zeros();
        for (p, v) in [(0, 4), (1, 5)] {
            m[(p, p)] = 0.25 * q;
            m[(p, v)] = 0.5 * q;
            m[(v, p)] = 0.5 * q;
            m[(v, v)] = q;
        }
        let s = self.size_noise * self.size_noise;
        m[(2, 2)] = s;
        m[(3, 3)] = s;
        m
    }

    fn measurement_cov(&self) -> Matrix4<f64> {
        Matrix4::identity() * (self.measurement_noise * self.measurement_noise)
    }
}

fn observation() -> Matrix4x6<f64> {
    let mut h = Matrix4x6::zeros();
    for i in 0..4 {
        h[(i, i)] = 1.0;
    }
    h
}

fn measurement(b: &BBox) -> Vector4<f64> {
    Vector4::new(b.x, b.y, b.w, b.h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub state: Vector6<f64>,
    pub covariance: Matrix6<f64>,
    pub age: usize,
    pub hits: usize,
    pub misses: usize,
    pub is_tx: bool,
}

impl Track {
    pub fn new(id: u64, b: &BBox, is_tx: bool, cfg: &TrackerConfig) -> Self {
        let r = cfg.measurement_noise.max(1.0).powi(2);
        let v = cfg.init_velocity_std.powi(2);
        Self {
            id,
            state: Vector6::new(b.x, b.y, b.w, b.h, 0.0, 0.0),
            covariance: Matrix6::from_diagonal(&Vector6::new(r, r, r, r, v, v)),
            age: 0,
            hits: 1,
            misses: 0,
            is_tx,
        }
    }

    pub fn bbox(&self) -> BBox {
        BBox::new(self.state[0], self.state[1], self.state[2], self.state[3])
    }

    /// Advance one frame; returns the predicted box.
    pub fn predict(&mut self, cfg: &TrackerConfig) -> BBox {
        let f = TrackerConfig::transition();
        self.state = f * self.state;
        self.covariance = f * self.covariance * f.transpose() + cfg.process_cov();
        self.symmetrize();
        self.age += 1;
        self.bbox()
    }

    /// Kalman measurement update in Joseph form.
    pub fn update(&mut self, det: &BBox, cfg: &TrackerConfig) -> Result<()> {
        let h = observation();
        let r = cfg.measurement_cov();
        let p = self.covariance;
        let s = h * p * h.transpose() + r;
        let s_inv = s.try_inverse().ok_or_else(|| Error::NumericFailure {
            layer: "kalman innovation".into(),
        })?;
        let k: Matrix6x4 = p * h.transpose() * s_inv;
        self.state += k * (measurement(det) - h * self.state);
        let a = Matrix6::identity() - k * h;
        self.covariance = a * p * a.transpose() + k * r * k.transpose();
        self.symmetrize();
        // Keep the size positive even after a wild measurement.
        self.state[2] = self.state[2].max(1e-3);
        self.state[3] = self.state[3].max(1e-3);
        self.hits += 1;
        self.misses = 0;
        Ok(())
    }

    fn symmetrize(&mut self) {
        self.covariance = (self.covariance + self.covariance.transpose()) * 0.5;
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Assignment {
    /// `(track index, detection index)` pairs.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// Greedy matching by descending IoU. Ties go to the lower track id, then the
/// lower detection index. Pairs with IoU below `gate` are never matched.
pub fn associate(tracks: &[BBox], track_ids: &[u64], detections: &[BBox], gate: f64) -> Assignment {
    let mut pairs = Vec::new();
    for (i, t) in tracks.iter().enumerate() {
        for (j, d) in detections.iter().enumerate() {
            let v = t.iou(d);
            if v >= gate && v > 0.0 {
                pairs.push((v, track_ids[i], i, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.3.cmp(&b.3)));
    let mut used_t = vec![false; tracks.len()];
    let mut used_d = vec![false; detections.len()];
    let mut out = Assignment::default();
    for (_, _, i, j) in pairs {
        if !used_t[i] && !used_d[j] {
            used_t[i] = true;
            used_d[j] = true;
            out.matches.push((i, j));
        }
    }
    out.unmatched_tracks = (0..tracks.len()).filter(|&i| !used_t[i]).collect();
    out.unmatched_detections = (0..detections.len()).filter(|&j| !used_d[j]).collect();
    out
}

/// Multi-object tracker for one sequence.
#[derive(Debug, Clone)]
pub struct Tracker {
    pub cfg: TrackerConfig,
    pub tracks: Vec<Track>,
    next_id: u64,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            tracks: Vec::new(),
            next_id: 0,
        })
    }

    pub fn spawn(&mut self, b: &BBox, is_tx: bool) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        self.tracks.push(Track::new(id, b, is_tx, &self.cfg));
        id
    }

    /// Predict, associate, update; unmatched detections start new tracks and
    /// tracks missing for more than `max_misses` frames are dropped.
    pub fn step(&mut self, detections: &[BBox]) -> Result<()> {
        let predicted: Vec<BBox> = self.tracks.iter_mut().map(|t| t.predict(&self.cfg)).collect();
        let ids: Vec<u64> = self.tracks.iter().map(|t| t.id).collect();
        let a = associate(&predicted, &ids, detections, self.cfg.iou_gate);
        for &(i, j) in &a.matches {
            self.tracks[i].update(&detections[j], &self.cfg)?;
        }
        for &i in &a.unmatched_tracks {
            self.tracks[i].misses += 1;
        }
        let max = self.cfg.max_misses;
        self.tracks.retain(|t| t.misses <= max);
        for &j in &a.unmatched_detections {
            self.spawn(&detections[j], false);
        }
        Ok(())
    }

    pub fn tx_track(&self) -> Option<&Track> {
        self.tracks.iter().find(|t| t.is_tx)
    }
}

/// Track the transmitter from its identified box.
///
/// `seed_detections` are the detections of the identification frame; the one
/// overlapping `tx_seed` most becomes the transmitter track (a fresh track
/// is started from `tx_seed` when none overlaps). Returns the transmitter box
/// for every entry of `frames`, or `TrackingLost` with the index of the frame
/// where its track was dropped.
pub fn track_sequence(
    seed_detections: &[BBox],
    tx_seed: &BBox,
    frames: &[Vec<BBox>],
    cfg: &TrackerConfig,
) -> Result<Vec<BBox>> {
    let mut tracker = Tracker::new(*cfg)?;
    let best = seed_detections
        .iter()
        .enumerate()
        .map(|(j, d)| (j, d.iou(tx_seed)))
        .filter(|&(_, v)| v > 0.0)
        .fold(None, |b: Option<(usize, f64)>, c| match b {
            Some(b) if b.1 >= c.1 => Some(b),
            _ => Some(c),
        })
        .map(|(j, _)| j);
    if best.is_none() {
        tracker.spawn(tx_seed, true);
    }
    for (j, d) in seed_detections.iter().enumerate() {
        tracker.spawn(d, Some(j) == best);
    }
    let mut out = Vec::with_capacity(frames.len());
    for (t, dets) in frames.iter().enumerate() {
        tracker.step(dets)?;
        match tracker.tx_track() {
            Some(tr) => out.push(tr.bbox()),
            None => return Err(Error::TrackingLost { frame: t }),
        }
    }
    Ok(out)
}

/// One line of the track log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub t: u64,
    pub track_id: u64,
    pub is_tx: bool,
    pub bbox: [f64; 4],
}

impl TrackRecord {
    pub fn of(t: u64, track: &Track) -> Self {
        let b = track.bbox();
        Self {
            t,
            track_id: track.id,
            is_tx: track.is_tx,
            bbox: [b.x, b.y, b.w, b.h],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    type M = Vec<Vec<f64>>;

    fn mat(r: usize, c: usize) -> M {
        vec![vec![0.0; c]; r]
    }
    fn mul(a: &M, b: &M) -> M {
        let mut o = mat(a.len(), b[0].len());
        for i in 0..a.len() {
            for j in 0..b[0].len() {
                for k in 0..b.len() {
                    o[i][j] += a[i][k] * b[k][j];
                }
            }
        }
        o
    }
    fn tr(a: &M) -> M {
        let mut o = mat(a[0].len(), a.len());
        for i in 0..a.len() {
            for j in 0..a[0].len() {
                o[j][i] = a[i][j];
            }
        }
        o
    }
    fn add(a: &M, b: &M, s: f64) -> M {
        a.iter()
            .zip(b)
            .map(|(r, q)| r.iter().zip(q).map(|(x, y)| x + s * y).collect())
            .collect()
    }
    /// Gauss-Jordan inverse with partial pivoting.
    fn inv(a: &M) -> M {
        let n = a.len();
        let mut m: M = a
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut row = r.clone();
                row.extend((0..n).map(|j| (i == j) as u8 as f64));
                row
            })
            .collect();
        for c in 0..n {
            let p = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
            m.swap(c, p);
            let d = m[c][c];
            for v in m[c].iter_mut() {
                *v /= d;
            }
            for r in 0..n {
                if r != c {
                    let f = m[r][c];
                    let row_c = m[c].clone();
                    for (v, w) in m[r].iter_mut().zip(row_c) {
                        *v -= f * w;
                    }
                }
            }
        }
        m.into_iter().map(|r| r[n..].to_vec()).collect()
    }

    /// Textbook recursion: x = F x, P = F P F' + Q; K = P H' (H P H' + R)^-1,
    /// x += K (z - H x), P = (I - K H) P.
    struct Oracle {
        x: M,
        p: M,
    }

    impl Oracle {
        fn step(&mut self, z: [f64; 4], cfg: &TrackerConfig) {
            let mut f = mat(6, 6);
            for i in 0..6 {
                f[i][i] = 1.0;
            }
            f[0][4] = 1.0;
            f[1][5] = 1.0;
            let q = cfg.process_noise.powi(2);
            let mut qm = mat(6, 6);
            let g = [[0.5, 1.0]];
            for (p, v) in [(0, 4), (1, 5)] {
                qm[p][p] = g[0][0] * g[0][0] * q;
                qm[p][v] = g[0][0] * g[0][1] * q;
                qm[v][p] = g[0][0] * g[0][1] * q;
                qm[v][v] = g[0][1] * g[0][1] * q;
            }
            qm[2][2] = cfg.size_noise.powi(2);
            qm[3][3] = cfg.size_noise.powi(2);
            self.x = mul(&f, &self.x);
            self.p = add(&mul(&mul(&f, &self.p), &tr(&f)), &qm, 1.0);
            let mut h = mat(4, 6);
            for i in 0..4 {
                h[i][i] = 1.0;
            }
            let mut r = mat(4, 4);
            for i in 0..4 {
                r[i][i] = cfg.measurement_noise.powi(2);
            }
            let s = add(&mul(&mul(&h, &self.p), &tr(&h)), &r, 1.0);
            let k = mul(&mul(&self.p, &tr(&h)), &inv(&s));
            let zm: M = z.iter().map(|&v| vec![v]).collect();
            let innov = add(&zm, &mul(&h, &self.x), -1.0);
            self.x = add(&self.x, &mul(&k, &innov), 1.0);
            let mut ikh = mul(&k, &h);
            for (i, row) in ikh.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = (i == j) as u8 as f64 - *v;
                }
            }
            self.p = mul(&ikh, &self.p);
        }
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn predict_trivial_cases() {
        let cfg = TrackerConfig::default();
        let b = BBox::new(50.0, 40.0, 10.0, 8.0);
        let mut t = Track::new(0, &b, true, &cfg);
        assert_eq!(t.predict(&cfg), b);
        t.state[4] = 3.0;
        let p = t.predict(&cfg);
        assert_eq!(p.x, 53.0);
        assert_eq!((p.y, p.w, p.h), (40.0, 10.0, 8.0));
    }

    #[test]
    fn matches_textbook_recursion() {
        let cfg = TrackerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b0 = BBox::new(20.0, 30.0, 12.0, 9.0);
        let mut t = Track::new(0, &b0, false, &cfg);
        let mut o = Oracle {
            x: t.state.iter().map(|&v| vec![v]).collect(),
            p: (0..6).map(|i| (0..6).map(|j| t.covariance[(i, j)]).collect()).collect(),
        };
        for k in 1..=10 {
            let z = BBox::new(
                20.0 + 2.5 * k as f64 + rng.gen_range(-1.0..1.0),
                30.0 - 1.0 * k as f64 + rng.gen_range(-1.0..1.0),
                12.0 + rng.gen_range(-0.5..0.5),
                9.0 + rng.gen_range(-0.5..0.5),
            );
            t.predict(&cfg);
            t.update(&z, &cfg).unwrap();
            o.step([z.x, z.y, z.w, z.h], &cfg);
        }
        for i in 0..6 {
            assert!(close(t.state[i], o.x[i][0]), "state {i}: {} vs {}", t.state[i], o.x[i][0]);
            for j in 0..6 {
                assert!(close(t.covariance[(i, j)], o.p[i][j]), "P[{i}][{j}]");
            }
        }
    }

    #[test]
    fn update_limit_cases() {
        let cfg = TrackerConfig::default();
        let b = BBox::new(5.0, 6.0, 7.0, 8.0);
        let mut t = Track::new(0, &b, false, &cfg);
        t.state[4] = 1.0;
        let pred = t.predict(&cfg);
        let before = t.state;
        t.update(&pred, &cfg).unwrap();
        assert!((t.state - before).norm() < 1e-12);
        assert_eq!((t.hits, t.misses), (2, 0));

        let exact = TrackerConfig {
            measurement_noise: 0.0,
            ..cfg
        };
        let mut t = Track::new(0, &b, false, &exact);
        t.predict(&exact);
        let z = BBox::new(9.0, 2.0, 6.0, 10.0);
        t.update(&z, &exact).unwrap();
        for (i, v) in [z.x, z.y, z.w, z.h].into_iter().enumerate() {
            assert!((t.state[i] - v).abs() < 1e-9);
        }
    }

    #[test]
    fn covariance_stays_psd() {
        let cfg = TrackerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 2.0).unwrap();
        let mut t = Track::new(0, &BBox::new(0.0, 0.0, 20.0, 10.0), true, &cfg);
        for k in 0..10_000 {
            t.predict(&cfg);
            if k % 7 != 3 {
                let z = BBox::new(
                    0.5 * k as f64 + noise.sample(&mut rng),
                    noise.sample(&mut rng),
                    20.0 + noise.sample(&mut rng),
                    10.0 + noise.sample(&mut rng),
                );
                t.update(&z, &cfg).unwrap();
            }
            let p = t.covariance;
            assert!((p - p.transpose()).amax() == 0.0);
            let min = p.symmetric_eigenvalues().min();
            assert!(min >= -1e-9, "cycle {k}: {min}");
            assert!(t.state[2] > 0.0 && t.state[3] > 0.0);
        }
    }

    #[test]
    fn association_trivial_cases() {
        let a = BBox::new(10.0, 10.0, 10.0, 10.0);
        let r = associate(&[a], &[0], &[BBox::new(11.0, 10.0, 10.0, 10.0)], 0.3);
        assert_eq!(r.matches, vec![(0, 0)]);
        let r = associate(&[a], &[0], &[BBox::new(18.0, 10.0, 10.0, 10.0)], 0.3);
        assert!(r.matches.is_empty());
        assert_eq!((r.unmatched_tracks, r.unmatched_detections), (vec![0], vec![0]));
    }

    /// Repeatedly take the best remaining pair by a linear scan.
    fn greedy_oracle(t: &[BBox], ids: &[u64], d: &[BBox], gate: f64) -> Vec<(usize, usize)> {
        let mut free_t: Vec<usize> = (0..t.len()).collect();
        let mut free_d: Vec<usize> = (0..d.len()).collect();
        let mut out = Vec::new();
        loop {
            let mut best: Option<(f64, u64, usize, usize)> = None;
            for &i in &free_t {
                for &j in &free_d {
                    let v = t[i].iou(&d[j]);
                    if v < gate || v == 0.0 {
                        continue;
                    }
                    let better = match best {
                        None => true,
                        Some((bv, bid, _, bj)) => v > bv || (v == bv && (ids[i] < bid || (ids[i] == bid && j < bj))),
                    };
                    if better {
                        best = Some((v, ids[i], i, j));
                    }
                }
            }
            match best {
                None => break,
                Some((_, _, i, j)) => {
                    out.push((i, j));
                    free_t.retain(|&x| x != i);
                    free_d.retain(|&x| x != j);
                }
            }
        }
        out
    }

    #[test]
    fn association_matches_exhaustive_greedy() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            // Coarse grid so that exact IoU ties actually occur.
            let rb = |rng: &mut ChaCha8Rng| {
                BBox::new(
                    rng.gen_range(0..6) as f64 * 2.0,
                    rng.gen_range(0..3) as f64 * 2.0,
                    rng.gen_range(2..5) as f64 * 2.0,
                    4.0,
                )
            };
            let t: Vec<BBox> = (0..4).map(|_| rb(&mut rng)).collect();
            let d: Vec<BBox> = (0..4).map(|_| rb(&mut rng)).collect();
            let mut ids: Vec<u64> = vec![7, 2, 9, 4];
            if rng.gen_bool(0.5) {
                ids.reverse();
            }
            let gate = rng.gen_range(0.05..0.6);
            let a = associate(&t, &ids, &d, gate);
            assert_eq!(a.matches, greedy_oracle(&t, &ids, &d, gate));
        }
    }

    proptest! {
        #[test]
        fn association_is_partial_matching(seed in 0u64..10_000, nt in 0usize..6, nd in 0usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t: Vec<BBox> = (0..nt).map(|_| BBox::new(rng.gen_range(0.0..30.0), 5.0, rng.gen_range(4.0..12.0), 6.0)).collect();
            let d: Vec<BBox> = (0..nd).map(|_| BBox::new(rng.gen_range(0.0..30.0), 5.0, rng.gen_range(4.0..12.0), 6.0)).collect();
            let ids: Vec<u64> = (0..nt as u64).collect();
            let a = associate(&t, &ids, &d, 0.3);
            let mut ti: Vec<usize> = a.matches.iter().map(|m| m.0).chain(a.unmatched_tracks.iter().copied()).collect();
            let mut dj: Vec<usize> = a.matches.iter().map(|m| m.1).chain(a.unmatched_detections.iter().copied()).collect();
            ti.sort();
            dj.sort();
            prop_assert_eq!(ti, (0..nt).collect::<Vec<_>>());
            prop_assert_eq!(dj, (0..nd).collect::<Vec<_>>());
            for &(i, j) in &a.matches {
                prop_assert!(t[i].iou(&d[j]) >= 0.3);
            }
        }
    }

    #[test]
    fn static_tx_keeps_box_and_id() {
        let cfg = TrackerConfig::default();
        let b = BBox::new(40.0, 30.0, 16.0, 10.0);
        let other = BBox::new(100.0, 30.0, 16.0, 10.0);
        let frames = vec![vec![b, other]; 20];
        let out = track_sequence(&[b, other], &b, &frames, &cfg).unwrap();
        assert!(out.iter().all(|o| (o.x - b.x).abs() < 1e-9 && (o.w - b.w).abs() < 1e-9));
        let mut tr = Tracker::new(cfg).unwrap();
        let id = tr.spawn(&b, true);
        for _ in 0..20 {
            tr.step(&[b]).unwrap();
        }
        assert_eq!(tr.tx_track().unwrap().id, id);
        assert_eq!(tr.tracks.len(), 1);
    }

    #[test]
    fn withheld_detections_lose_track() {
        let cfg = TrackerConfig::default();
        let b = BBox::new(40.0, 30.0, 16.0, 10.0);
        let mut frames = vec![vec![b]; 3];
        frames.extend(vec![Vec::new(); cfg.max_misses + 1]);
        match track_sequence(&[b], &b, &frames, &cfg) {
            Err(Error::TrackingLost { frame }) => assert_eq!(frame, 3 + cfg.max_misses),
            other => panic!("{other:?}"),
        }
        frames.truncate(3 + cfg.max_misses);
        assert!(track_sequence(&[b], &b, &frames, &cfg).is_ok());
    }

    #[test]
    fn ids_never_reused() {
        let mut tr = Tracker::new(TrackerConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..200 {
            let dets: Vec<BBox> = (0..rng.gen_range(0..4))
                .map(|_| BBox::new(rng.gen_range(0.0..200.0), 50.0, 10.0, 10.0))
                .collect();
            let before: std::collections::HashSet<u64> = tr.tracks.iter().map(|t| t.id).collect();
            tr.step(&dets).unwrap();
            for t in &tr.tracks {
                if !before.contains(&t.id) {
                    assert!(seen.insert(t.id), "id {} reused", t.id);
                }
            }
        }
    }

    #[test]
    fn record_shape() {
        let t = Track::new(3, &BBox::new(1.0, 2.0, 3.0, 4.0), true, &TrackerConfig::default());
        assert_eq!(
            serde_json::to_string(&TrackRecord::of(9, &t)).unwrap(),
            r#"{"t":9,"track_id":3,"is_tx":true,"bbox":[1.0,2.0,3.0,4.0]}"#
        );
    }

    #[test]
    fn config_validation() {
        assert!(TrackerConfig { iou_gate: 1.0, ..Default::default() }.validate().is_err());
        assert!(TrackerConfig { process_noise: -1.0, ..Default::default() }.validate().is_err());
        assert!(TrackerConfig::default().validate().is_ok());
    }
}
