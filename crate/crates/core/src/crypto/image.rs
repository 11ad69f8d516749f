//! PPM (P3 ASCII / P6 binary) image reader and writer, maxval 255.

use std::path::Path;

use crate::error::{Error, Result};
use crate::util::write_atomic;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    /// Row-major (R, G, B) triples.
    pub pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("image must be at least 1x1".into()));
        }
        Ok(RgbImage { width, height, pixels: vec![[0; 3]; width * height] })
    }
}

struct Scanner<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Scanner<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a str> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Parse { offset: start, msg: "unexpected end of file".into() });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|e| Error::Parse { offset: start, msg: format!("{e}") })
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let off = self.pos;
        let tok = self.token()?;
        tok.parse().map_err(|e| Error::Parse { offset: off, msg: format!("bad {what} {tok:?}: {e}") })
    }
}

pub fn parse_ppm(bytes: &[u8]) -> Result<RgbImage> {
    let mut sc = Scanner { bytes, pos: 0 };
    let magic = sc.token()?;
    match magic {
        "P3" | "P6" => {}
        "P5" | "P2" => return Err(Error::UnsupportedFormat(format!("{magic} greyscale input"))),
        other => return Err(Error::UnsupportedFormat(format!("magic {other:?}"))),
    }
    let width = sc.number("width")?;
    let height = sc.number("height")?;
    let maxval_off = sc.pos;
    let maxval = sc.number("maxval")?;
    if maxval != 255 {
        return Err(Error::Parse { offset: maxval_off, msg: format!("maxval must be 255, got {maxval}") });
    }
    let mut img = RgbImage::new(width, height)?;
    let n = width * height * 3;
    if magic == "P3" {
        for i in 0..n {
            let off = sc.pos;
            let v = sc.number("pixel value")?;
            if v > 255 {
                return Err(Error::Parse { offset: off, msg: format!("pixel value {v} exceeds 255") });
            }
            img.pixels[i / 3][i % 3] = v as u8;
        }
        sc.skip_space_and_comments();
        if sc.pos != bytes.len() {
            return Err(Error::Parse { offset: sc.pos, msg: "trailing data after pixels".into() });
        }
    } else {
        // exactly one whitespace byte separates the maxval from the raster
        if sc.pos >= bytes.len() || !bytes[sc.pos].is_ascii_whitespace() {
            return Err(Error::Parse { offset: sc.pos, msg: "missing raster separator".into() });
        }
        let data_start = sc.pos + 1;
        if bytes.len() < data_start + n {
            return Err(Error::Parse {
                offset: bytes.len(),
                msg: format!("raster truncated: need {n} bytes, have {}", bytes.len() - data_start),
            });
        }
        if bytes.len() > data_start + n {
            return Err(Error::Parse { offset: data_start + n, msg: "trailing data after raster".into() });
        }
        for i in 0..n {
            img.pixels[i / 3][i % 3] = bytes[data_start + i];
        }
    }
    Ok(img)
}

pub fn load_ppm(path: &Path) -> Result<RgbImage> {
    parse_ppm(&std::fs::read(path)?)
}

pub fn encode_p6(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    for px in &img.pixels {
        out.extend_from_slice(px);
    }
    out
}

pub fn encode_p3(img: &RgbImage) -> Vec<u8> {
    let mut s = format!("P3\n{} {}\n255\n", img.width, img.height);
    for px in &img.pixels {
        s.push_str(&format!("{} {} {}\n", px[0], px[1], px[2]));
    }
    s.into_bytes()
}

/// Saves as binary P6.
pub fn save_ppm(img: &RgbImage, path: &Path) -> Result<()> {
    write_atomic(path, &encode_p6(img))
}
