use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::region::BeamRegion;
use crate::bbox::BBox;
use crate::error::{invalid, Error, Result};
use crate::scene::RgbImage;

/// Candidate beams for one frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchSpace {
    pub t: u64,
    pub bits: Vec<bool>,
}

impl SearchSpace {
    pub fn all(q: usize, t: u64) -> Self {
        Self {
            t,
            bits: vec![true; q],
        }
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn to_bitstring(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn from_bitstring(s: &str, t: u64) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '1' => Ok(true),
                '0' => Ok(false),
                _ => Err(Error::Format(format!("bad bit {c:?}"))),
            })
            .collect::<Result<_>>()?;
        Ok(Self { t, bits })
    }
}

#[derive(Serialize, Deserialize)]
struct SearchSpaceRecord {
    t: u64,
    bits: String,
}

impl Serialize for SearchSpace {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SearchSpaceRecord {
            t: self.t,
            bits: self.to_bitstring(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SearchSpace {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = SearchSpaceRecord::deserialize(d)?;
        SearchSpace::from_bitstring(&r.bits, r.t).map_err(serde::de::Error::custom)
    }
}

/// Zero every pixel whose center lies outside `bbox`.
pub fn isolate_tx(image: &RgbImage, bbox: &BBox) -> Result<RgbImage> {
    let (cols, rows) = bbox.pixel_ranges(image.width, image.height);
    if cols.is_empty() || rows.is_empty() {
        return invalid("box does not intersect the image");
    }
    let mut out = RgbImage::filled(image.width, image.height, [0, 0, 0]);
    for row in rows {
        let a = 3 * (row * image.width + cols.start);
        let b = 3 * (row * image.width + cols.end);
        out.data[a..b].copy_from_slice(&image.data[a..b]);
    }
    Ok(out)
}

/// Beams whose region holds at least one nonzero pixel of `isolated`.
pub fn reduce_search_space(isolated: &RgbImage, regions: &[BeamRegion], t: u64) -> Result<SearchSpace> {
    let (w, h) = (isolated.width, isolated.height);
    let bits: Vec<bool> = regions
        .iter()
        .map(|r| {
            let Some([x0, y0, x1, y1]) = r.bounds() else {
                return false;
            };
            let (cols, rows) = BBox::from_corners(x0, y0, x1, y1).pixel_ranges(w, h);
            rows.into_iter().any(|row| {
                cols.clone().any(|col| {
                    !isolated.is_zero_at(col, row)
                        && r.contains([col as f64 + 0.5, row as f64 + 0.5])
                })
            })
        })
        .collect();
    if !bits.iter().any(|&b| b) {
        return Err(Error::EmptySearchSpace);
    }
    Ok(SearchSpace { t, bits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::ColumnMap;
    use crate::geometry::region::{beam_regions, RegionVariant};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noisy_image(w: usize, h: usize, seed: u64) -> RgbImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RgbImage {
            width: w,
            height: h,
            data: (0..w * h * 3).map(|_| rng.gen_range(1..=255)).collect(),
        }
    }

    #[test]
    fn full_box_is_identity() {
        let img = noisy_image(80, 64, 1);
        let b = BBox::from_corners(0.0, 0.0, 80.0, 64.0);
        assert_eq!(isolate_tx(&img, &b).unwrap(), img);
        assert!(isolate_tx(&img, &BBox::new(200.0, 10.0, 5.0, 5.0)).is_err());
    }

    #[test]
    fn isolated_support_matches_box_rasterization() {
        let img = noisy_image(96, 64, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let b = BBox::new(
                rng.gen_range(-10.0..100.0),
                rng.gen_range(-10.0..70.0),
                rng.gen_range(1.0..40.0),
                rng.gen_range(1.0..40.0),
            );
            let Ok(out) = isolate_tx(&img, &b) else {
                continue;
            };
            for row in 0..64 {
                for col in 0..96 {
                    let (cx, cy) = (col as f64 + 0.5, row as f64 + 0.5);
                    let inside = cx >= b.x0() && cx < b.x1() && cy >= b.y0() && cy < b.y1();
                    assert_eq!(!out.is_zero_at(col, row), inside);
                }
            }
        }
    }

    fn map() -> ColumnMap {
        ColumnMap {
            edges: (0..=8).map(|i| 16 + 12 * i).collect(),
            boundary_x: (0..=8).map(|i| (16 + 12 * i) as f64).collect(),
            anchor_row: 79.5,
            width: 128,
            height: 80,
        }
    }

    fn blob(x0: usize, x1: usize, y0: usize, y1: usize) -> RgbImage {
        let mut img = RgbImage::filled(128, 80, [0, 0, 0]);
        for row in y0..y1 {
            for col in x0..x1 {
                img.set_pixel(col, row, [200, 10, 10]);
            }
        }
        img
    }

    #[test]
    fn inside_one_fan_gives_one_bit() {
        let regions = beam_regions(&map(), RegionVariant::Fan, Some([64.0, 600.0])).unwrap();
        // Beam 3 spans columns 52..64 on the anchor row.
        let s = reduce_search_space(&blob(55, 61, 70, 78), &regions, 0).unwrap();
        assert_eq!(s.popcount(), 1);
        assert!(s.bits[3]);
        let s = reduce_search_space(&blob(60, 68, 70, 78), &regions, 0).unwrap();
        assert_eq!(s.to_bitstring(), "00011000");
        assert!(matches!(
            reduce_search_space(&blob(0, 4, 0, 4), &regions, 0),
            Err(Error::EmptySearchSpace)
        ));
    }

    #[test]
    fn bits_match_brute_force() {
        let regions = beam_regions(&map(), RegionVariant::Fan, Some([40.0, 500.0])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let x0 = rng.gen_range(0..120);
            let y0 = rng.gen_range(0..76);
            let img = blob(x0, (x0 + rng.gen_range(1..30)).min(128), y0, (y0 + rng.gen_range(1..20)).min(80));
            let got = reduce_search_space(&img, &regions, 5);
            let mut want = vec![false; 8];
            for row in 0..80 {
                for col in 0..128 {
                    if img.is_zero_at(col, row) {
                        continue;
                    }
                    let p = [col as f64 + 0.5, row as f64 + 0.5];
                    for r in &regions {
                        if r.contains(p) {
                            want[r.beam] = true;
                        }
                    }
                }
            }
            match got {
                Ok(s) => assert_eq!(s.bits, want),
                Err(_) => assert!(!want.iter().any(|&b| b)),
            }
        }
    }

    #[test]
    fn jsonl_bitstring() {
        let s = SearchSpace::from_bitstring("0110", 7).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"t":7,"bits":"0110"}"#);
        assert_eq!(serde_json::from_str::<SearchSpace>(&j).unwrap(), s);
        assert!(SearchSpace::from_bitstring("01x", 0).is_err());
    }
}
