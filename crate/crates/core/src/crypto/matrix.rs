//! 6-bit word grids per color channel, key generation, and their text forms.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::util::write_atomic;

pub const WORD_BITS: u32 = 6;
pub const WORD_MAX: u8 = 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    R,
    G,
    B,
}

impl Channel {
    pub fn index(self) -> usize {
        match self {
            Channel::R => 0,
            Channel::G => 1,
            Channel::B => 2,
        }
    }

    pub fn all() -> [Channel; 3] {
        [Channel::R, Channel::G, Channel::B]
    }
}

/// Row-major grid of 6-bit words for one channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelMatrix {
    pub width: usize,
    pub height: usize,
    pub words: Vec<u8>,
    pub tag: Channel,
}

impl ChannelMatrix {
    pub fn new(width: usize, height: usize, tag: Channel) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("matrix must be at least 1x1".into()));
        }
        Ok(ChannelMatrix { width, height, words: vec![0; width * height], tag })
    }

    pub fn validate(&self) -> Result<()> {
        if self.words.len() != self.width * self.height {
            return Err(Error::DimensionMismatch(format!(
                "matrix holds {} words for {}x{}",
                self.words.len(),
                self.width,
                self.height
            )));
        }
        if let Some(w) = self.words.iter().find(|w| **w > WORD_MAX) {
            return Err(Error::OutOfRange { what: "6-bit word", value: *w as f64 });
        }
        Ok(())
    }
}

/// Per-channel key material, regenerable from the seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyMatrix {
    pub r: ChannelMatrix,
    pub g: ChannelMatrix,
    pub b: ChannelMatrix,
    pub seed: u64,
}

impl KeyMatrix {
    pub fn channel(&self, ch: Channel) -> &ChannelMatrix {
        match ch {
            Channel::R => &self.r,
            Channel::G => &self.g,
            Channel::B => &self.b,
        }
    }

    pub fn channel_mut(&mut self, ch: Channel) -> &mut ChannelMatrix {
        match ch {
            Channel::R => &mut self.r,
            Channel::G => &mut self.g,
            Channel::B => &mut self.b,
        }
    }
}

/// Deterministic key schedule: one SplitMix64 stream from `seed`; the low
/// 6 bits of each output become one word; fill order R, then G, then B,
/// each row-major.
pub fn gen_key(seed: u64, width: usize, height: usize) -> Result<KeyMatrix> {
    let mut stream = SplitMix64::new(seed);
    let mut gen = |tag: Channel| -> Result<ChannelMatrix> {
        let mut m = ChannelMatrix::new(width, height, tag)?;
        for w in m.words.iter_mut() {
            *w = (stream.next_u64() & 0x3F) as u8;
        }
        Ok(m)
    };
    Ok(KeyMatrix { r: gen(Channel::R)?, g: gen(Channel::G)?, b: gen(Channel::B)?, seed })
}

/// Bitwise exclusive-or of two 6-bit words.
pub fn xor_word(a: u8, b: u8) -> Result<u8> {
    if a > WORD_MAX || b > WORD_MAX {
        return Err(Error::OutOfRange { what: "6-bit word", value: a.max(b) as f64 });
    }
    Ok(a ^ b)
}

/// MSB-first 6-bit string, the display form of a word.
pub fn word_bits(w: u8) -> String {
    (0..WORD_BITS).rev().map(|i| if w >> i & 1 == 1 { '1' } else { '0' }).collect()
}

fn write_blocks(header: &str, blocks: [&ChannelMatrix; 3]) -> String {
    let mut s = String::from(header);
    for (i, m) in blocks.iter().enumerate() {
        if i > 0 {
            s.push('\n');
        }
        for row in 0..m.height {
            for col in 0..m.width {
                if col > 0 {
                    s.push(' ');
                }
                let _ = write!(s, "{:02x}", m.words[row * m.width + col]);
            }
            s.push('\n');
        }
    }
    s
}

fn parse_blocks(
    lines: &mut std::iter::Peekable<std::str::Lines>,
    width: usize,
    height: usize,
    offset: &mut usize,
) -> Result<[Vec<u8>; 3]> {
    let mut out: [Vec<u8>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for block in out.iter_mut() {
        // skip blank separators
        while let Some(l) = lines.peek() {
            if l.trim().is_empty() {
                *offset += l.len() + 1;
                lines.next();
            } else {
                break;
            }
        }
        for _ in 0..height {
            let line = lines.next().ok_or(Error::Parse { offset: *offset, msg: "missing block row".into() })?;
            let words: Vec<&str> = line.split_whitespace().collect();
            if words.len() != width {
                return Err(Error::Parse {
                    offset: *offset,
                    msg: format!("expected {width} words per row, got {}", words.len()),
                });
            }
            for w in words {
                let v = u8::from_str_radix(w, 16)
                    .map_err(|e| Error::Parse { offset: *offset, msg: format!("bad hex word {w:?}: {e}") })?;
                if v > WORD_MAX {
                    return Err(Error::Parse { offset: *offset, msg: format!("word {v:#x} exceeds 6 bits") });
                }
                block.push(v);
            }
            *offset += line.len() + 1;
        }
    }
    Ok(out)
}

impl KeyMatrix {
    pub fn to_text(&self) -> String {
        let header = format!("MHDDKEY 1 {} {} {:016x}\n", self.r.width, self.r.height, self.seed);
        write_blocks(&header, [&self.r, &self.g, &self.b])
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().peekable();
        let header = lines.next().ok_or(Error::Parse { offset: 0, msg: "empty key file".into() })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 || fields[0] != "MHDDKEY" {
            return Err(Error::Parse { offset: 0, msg: format!("bad key header {header:?}") });
        }
        if fields[1] != "1" {
            return Err(Error::Version(format!("unsupported key file version {}", fields[1])));
        }
        let width: usize = fields[2].parse().map_err(|e| Error::Parse { offset: 0, msg: format!("{e}") })?;
        let height: usize = fields[3].parse().map_err(|e| Error::Parse { offset: 0, msg: format!("{e}") })?;
        let seed = u64::from_str_radix(fields[4], 16)
            .map_err(|e| Error::Parse { offset: 0, msg: format!("bad seed: {e}") })?;
        let mut offset = header.len() + 1;
        let [rw, gw, bw] = parse_blocks(&mut lines, width, height, &mut offset)?;
        let mk = |tag, words| -> Result<ChannelMatrix> {
            let m = ChannelMatrix { width, height, words, tag };
            m.validate()?;
            Ok(m)
        };
        Ok(KeyMatrix {
            r: mk(Channel::R, rw)?,
            g: mk(Channel::G, gw)?,
            b: mk(Channel::B, bw)?,
            seed,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Word dump of three channel matrices (same block format, no seed).
pub fn words_to_text(r: &ChannelMatrix, g: &ChannelMatrix, b: &ChannelMatrix) -> String {
    let header = format!("MHDDWORDS 1 {} {}\n", r.width, r.height);
    write_blocks(&header, [r, g, b])
}

pub fn words_from_text(text: &str) -> Result<[ChannelMatrix; 3]> {
    let mut lines = text.lines().peekable();
    let header = lines.next().ok_or(Error::Parse { offset: 0, msg: "empty word dump".into() })?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "MHDDWORDS" {
        return Err(Error::Parse { offset: 0, msg: format!("bad word-dump header {header:?}") });
    }
    if fields[1] != "1" {
        return Err(Error::Version(format!("unsupported word-dump version {}", fields[1])));
    }
    let width: usize = fields[2].parse().map_err(|e| Error::Parse { offset: 0, msg: format!("{e}") })?;
    let height: usize = fields[3].parse().map_err(|e| Error::Parse { offset: 0, msg: format!("{e}") })?;
    let mut offset = header.len() + 1;
    let [rw, gw, bw] = parse_blocks(&mut lines, width, height, &mut offset)?;
    Ok([
        ChannelMatrix { width, height, words: rw, tag: Channel::R },
        ChannelMatrix { width, height, words: gw, tag: Channel::G },
        ChannelMatrix { width, height, words: bw, tag: Channel::B },
    ])
}
