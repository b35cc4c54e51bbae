use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::render::RgbImage;
use crate::bbox::BBox;
use crate::error::{Error, Result};

/// Binary PPM (P6), maxval 255.
pub fn write_ppm<W: Write>(mut w: W, image: &RgbImage) -> Result<()> {
    write!(w, "P6\n{} {}\n255\n", image.width, image.height)?;
    w.write_all(&image.data)?;
    Ok(())
}

/// Read one whitespace-delimited header token, skipping `#` comments.
pub(crate) fn header_token<R: BufRead>(r: &mut R) -> Result<String> {
    let mut tok = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            break;
        }
        let b = byte[0];
        if b == b'#' && tok.is_empty() {
            let mut skip = String::new();
            r.read_line(&mut skip)?;
            continue;
        }
        if b.is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            break;
        }
        tok.push(b);
    }
    if tok.is_empty() {
        return Err(Error::Format("truncated header".into()));
    }
    String::from_utf8(tok).map_err(|e| Error::Format(e.to_string()))
}

pub(crate) fn header_usize<R: BufRead>(r: &mut R) -> Result<usize> {
    let t = header_token(r)?;
    t.parse()
        .map_err(|_| Error::Format(format!("expected integer, got {t:?}")))
}

pub fn read_ppm<R: BufRead>(mut r: R) -> Result<RgbImage> {
    if header_token(&mut r)? != "P6" {
        return Err(Error::Format("not a binary PPM".into()));
    }
    let width = header_usize(&mut r)?;
    let height = header_usize(&mut r)?;
    if header_usize(&mut r)? != 255 {
        return Err(Error::Format("only maxval 255 is supported".into()));
    }
    let mut data = vec![0u8; width * height * 3];
    r.read_exact(&mut data)?;
    Ok(RgbImage {
        width,
        height,
        data,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxAnnotation {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoxAnnotation {
    pub fn new(id: u32, b: &BBox) -> Self {
        Self {
            id,
            x: b.x,
            y: b.y,
            w: b.w,
            h: b.h,
        }
    }

    pub fn bbox(&self) -> BBox {
        BBox::new(self.x, self.y, self.w, self.h)
    }
}

/// One JSON-lines annotation record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameAnnotation {
    pub t: usize,
    pub boxes: Vec<BoxAnnotation>,
    pub tx_id: u32,
    pub tx_azimuth: f64,
}

pub fn write_jsonl<W: Write, T: Serialize>(mut w: W, records: &[T]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead, T: for<'de> Deserialize<'de>>(r: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_round_trip() {
        let mut img = RgbImage::filled(5, 3, [1, 2, 3]);
        img.set_pixel(4, 2, [255, 0, 9]);
        let mut buf = Vec::new();
        write_ppm(&mut buf, &img).unwrap();
        assert!(buf.starts_with(b"P6\n5 3\n255\n"));
        assert_eq!(read_ppm(&buf[..]).unwrap(), img);
    }

    #[test]
    fn annotation_line_shape() {
        let a = FrameAnnotation {
            t: 3,
            boxes: vec![BoxAnnotation::new(7, &BBox::new(1.0, 2.0, 3.0, 4.0))],
            tx_id: 7,
            tx_azimuth: -0.25,
        };
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &[a.clone()]).unwrap();
        let line = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            line.trim(),
            r#"{"t":3,"boxes":[{"id":7,"x":1.0,"y":2.0,"w":3.0,"h":4.0}],"tx_id":7,"tx_azimuth":-0.25}"#
        );
        let back: Vec<FrameAnnotation> = read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, vec![a]);
    }
}
