//! Addressable rows x cols x channels grid of simulated units with word
//! read/write through the codec and durable text persistence.

use std::path::Path;

use rayon::prelude::*;

use crate::codec::{program_level, read_level, LevelCodec, ProgramReport};
use crate::device::{spawn_unit, ModelParams, UnitState};
use crate::error::{Error, Result};
use crate::rng;
use crate::util::{crc32, write_atomic};

pub const CHANNELS: usize = 3;
pub const BITS_PER_UNIT: usize = 6;
/// Binary cells needed per pixel on a single-bit-per-cell disk.
pub const BINARY_UNITS_PER_PIXEL: usize = BITS_PER_UNIT * CHANNELS;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArrayGeometry {
    pub rows: usize,
    pub cols: usize,
    pub channels: usize,
}

impl ArrayGeometry {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("geometry must be at least 1x1".into()));
        }
        Ok(ArrayGeometry { rows, cols, channels: CHANNELS })
    }

    pub fn unit_count(&self) -> usize {
        self.rows * self.cols * self.channels
    }

    pub fn index_of(&self, row: usize, col: usize, channel: usize) -> Result<usize> {
        if row >= self.rows || col >= self.cols || channel >= self.channels {
            return Err(Error::OutOfBounds { row, col, channel });
        }
        Ok((row * self.cols + col) * self.channels + channel)
    }
}

/// Capacity accounting against a binary single-bit-per-cell disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityReport {
    pub molecular_units: usize,
    pub binary_units: usize,
    pub ratio: f64,
}

pub fn capacity_report(geometry: &ArrayGeometry) -> CapacityReport {
    let pixels = geometry.rows * geometry.cols;
    CapacityReport {
        molecular_units: pixels * CHANNELS,
        binary_units: pixels * BINARY_UNITS_PER_PIXEL,
        ratio: 1.0 / BITS_PER_UNIT as f64,
    }
}

#[derive(Debug, Clone)]
pub struct MolecularArray {
    pub geometry: ArrayGeometry,
    pub units: Vec<UnitState>,
    /// Last successfully written level per unit; None = never written.
    pub levels: Vec<Option<u8>>,
    pub params: ModelParams,
    pub codec: LevelCodec,
    pub master_seed: u64,
}

impl MolecularArray {
    /// All units pristine, device factors derived from (master_seed, index).
    pub fn allocate(
        geometry: ArrayGeometry,
        params: ModelParams,
        codec: LevelCodec,
        master_seed: u64,
    ) -> Result<Self> {
        codec.validate()?;
        params.validate()?;
        let units = (0..geometry.unit_count())
            .map(|i| {
                let mut stream = rng::substream(master_seed, i as u64);
                spawn_unit(&params, stream.next_u64())
            })
            .collect();
        Ok(MolecularArray {
            levels: vec![None; geometry.unit_count()],
            geometry,
            units,
            params,
            codec,
            master_seed,
        })
    }

    pub fn write_word(&mut self, row: usize, col: usize, channel: usize, value: u8) -> Result<ProgramReport> {
        let idx = self.geometry.index_of(row, col, channel)?;
        let report = program_level(&self.units[idx], value, &self.codec, &self.params)
            .map_err(|e| annotate_program_error(e, row, col, channel))?;
        self.units[idx] = report.state.clone();
        self.levels[idx] = Some(value);
        Ok(report)
    }

    pub fn read_word(&self, row: usize, col: usize, channel: usize, noise_seed: Option<u64>) -> Result<u8> {
        let idx = self.geometry.index_of(row, col, channel)?;
        let reading = read_level(&self.units[idx], &self.codec, &self.params, noise_seed);
        if !reading.written || self.levels[idx].is_none() {
            return Err(Error::Unwritten { row, col, channel });
        }
        Ok(reading.level)
    }

    /// Bulk write: one value per unit in address order, parallel across units.
    pub fn write_all(&mut self, values: &[u8]) -> Result<()> {
        if values.len() != self.units.len() {
            return Err(Error::DimensionMismatch(format!(
                "got {} values for {} units",
                values.len(),
                self.units.len()
            )));
        }
        let params = &self.params;
        let codec = &self.codec;
        let results: Vec<Result<UnitState>> = self
            .units
            .par_iter()
            .zip(values.par_iter())
            .map(|(u, &v)| program_level(u, v, codec, params).map(|r| r.state))
            .collect();
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Ok(state) => {
                    self.units[i] = state;
                    self.levels[i] = Some(values[i]);
                }
                Err(e) => {
                    let (row, col, channel) = self.addr_of(i);
                    return Err(annotate_program_error(e, row, col, channel));
                }
            }
        }
        Ok(())
    }

    /// Bulk noiseless-or-seeded read of every unit in address order.
    pub fn read_all(&self, noise_seed: Option<u64>) -> Result<Vec<u8>> {
        let out: Vec<Result<u8>> = (0..self.units.len())
            .into_par_iter()
            .map(|i| {
                let seed = noise_seed.map(|s| {
                    let mut stream = rng::substream(s, i as u64);
                    stream.next_u64()
                });
                let r = read_level(&self.units[i], &self.codec, &self.params, seed);
                if !r.written || self.levels[i].is_none() {
                    let (row, col, channel) = self.addr_of(i);
                    Err(Error::Unwritten { row, col, channel })
                } else {
                    Ok(r.level)
                }
            })
            .collect();
        out.into_iter().collect()
    }

    fn addr_of(&self, idx: usize) -> (usize, usize, usize) {
        let channel = idx % self.geometry.channels;
        let pixel = idx / self.geometry.channels;
        (pixel / self.geometry.cols, pixel % self.geometry.cols, channel)
    }

    /// Line-oriented text snapshot with a trailing CRC32.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.units.len() * 80);
        s.push_str(&format!(
            "MHDD 1 {} {} {}\n",
            self.geometry.rows, self.geometry.cols, self.geometry.channels
        ));
        for (i, u) in self.units.iter().enumerate() {
            let level = match self.levels[i] {
                Some(l) => l.to_string(),
                None => "-".to_string(),
            };
            s.push_str(&format!("{} {:.16e} {:.16e} {:.16e} {}\n", i, u.x, u.c, u.device_factor, level));
        }
        s.push_str(&format!("CRC32 {:08x}\n", crc32(s.as_bytes())));
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }

    pub fn from_text(text: &str, params: ModelParams, codec: LevelCodec) -> Result<Self> {
        let crc_line_start = text
            .trim_end_matches('\n')
            .rfind('\n')
            .map(|i| i + 1)
            .ok_or(Error::Parse { offset: 0, msg: "file too short".into() })?;
        let (body, crc_line) = text.split_at(crc_line_start);
        let crc_line = crc_line.trim();
        let stored = crc_line
            .strip_prefix("CRC32 ")
            .ok_or(Error::Parse { offset: crc_line_start, msg: "missing CRC32 trailer".into() })?;
        let stored = u32::from_str_radix(stored, 16)
            .map_err(|e| Error::Parse { offset: crc_line_start, msg: format!("bad CRC32: {e}") })?;
        let computed = crc32(body.as_bytes());
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }

        let mut lines = body.lines();
        let header = lines.next().ok_or(Error::Parse { offset: 0, msg: "empty file".into() })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 || fields[0] != "MHDD" {
            return Err(Error::Parse { offset: 0, msg: format!("bad header {header:?}") });
        }
        if fields[1] != "1" {
            return Err(Error::Version(format!("unsupported array file version {}", fields[1])));
        }
        let rows: usize = fields[2].parse().map_err(|e| Error::Parse { offset: 0, msg: format!("{e}") })?;
        let cols: usize = fields[3].parse().map_err(|e| Error::Parse { offset: 0, msg: format!("{e}") })?;
        let channels: usize = fields[4].parse().map_err(|e| Error::Parse { offset: 0, msg: format!("{e}") })?;
        if channels != CHANNELS {
            return Err(Error::Parse { offset: 0, msg: format!("expected {CHANNELS} channels, got {channels}") });
        }
        let geometry = ArrayGeometry::new(rows, cols)?;
        let mut units = Vec::with_capacity(geometry.unit_count());
        let mut levels = Vec::with_capacity(geometry.unit_count());
        let mut offset = header.len() + 1;
        for (n, line) in lines.enumerate() {
            let cols_v: Vec<&str> = line.split_whitespace().collect();
            if cols_v.len() != 5 {
                return Err(Error::Parse { offset, msg: format!("expected 5 fields, got {}", cols_v.len()) });
            }
            let idx: usize = cols_v[0].parse().map_err(|e| Error::Parse { offset, msg: format!("{e}") })?;
            if idx != n {
                return Err(Error::Parse { offset, msg: format!("unit index {idx} out of order (expected {n})") });
            }
            let x: f64 = cols_v[1].parse().map_err(|e| Error::Parse { offset, msg: format!("{e}") })?;
            let c: f64 = cols_v[2].parse().map_err(|e| Error::Parse { offset, msg: format!("{e}") })?;
            let df: f64 = cols_v[3].parse().map_err(|e| Error::Parse { offset, msg: format!("{e}") })?;
            if !(0.0..=1.0).contains(&x) || !(-1.0..=1.0).contains(&c) || !(df > 0.0) {
                return Err(Error::Parse { offset, msg: format!("state out of range at unit {n}") });
            }
            let level = match cols_v[4] {
                "-" => None,
                l => Some(l.parse::<u8>().map_err(|e| Error::Parse { offset, msg: format!("{e}") })?),
            };
            units.push(UnitState { x, c, device_factor: df, elapsed_s: 0.0 });
            levels.push(level);
            offset += line.len() + 1;
        }
        if units.len() != geometry.unit_count() {
            return Err(Error::Parse {
                offset,
                msg: format!("expected {} units, found {}", geometry.unit_count(), units.len()),
            });
        }
        Ok(MolecularArray { geometry, units, levels, params, codec, master_seed: 0 })
    }

    pub fn load(path: &Path, params: ModelParams, codec: LevelCodec) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?, params, codec)
    }
}

fn annotate_program_error(e: Error, row: usize, col: usize, channel: usize) -> Error {
    match e {
        Error::ProgramFailure { target, last_g, iters, .. } => {
            Error::ProgramFailureAt { row, col, channel, target, last_g, iters }
        }
        other => other,
    }
}
