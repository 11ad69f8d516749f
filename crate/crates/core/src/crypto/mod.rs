//! In-situ bitwise image encryption: RGB decomposition, 64-level
//! quantization, key generation, and XOR executed bit-by-bit on a scratch
//! unit with the result reprogrammed into the storage units.

mod image;
mod matrix;
pub mod stats;

pub use image::{encode_p3, encode_p6, load_ppm, parse_ppm, save_ppm, RgbImage};
pub use matrix::{
    gen_key, word_bits, words_from_text, words_to_text, xor_word, Channel, ChannelMatrix, KeyMatrix,
    WORD_BITS, WORD_MAX,
};

use rayon::prelude::*;

use crate::array::MolecularArray;
use crate::error::{Error, Result};
use crate::logic::{reset_to_logic0, xor_gate};
use crate::rng;
use crate::device::spawn_unit;

/// 8-bit staging plane of one color channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plane8 {
    pub width: usize,
    pub height: usize,
    pub values: Vec<u8>,
}

/// Channel extraction: one 8-bit plane per primary color.
pub fn decompose_rgb(img: &RgbImage) -> [Plane8; 3] {
    let mk = |i: usize| Plane8 {
        width: img.width,
        height: img.height,
        values: img.pixels.iter().map(|px| px[i]).collect(),
    };
    [mk(0), mk(1), mk(2)]
}

/// Inverse of `decompose_rgb` on 8-bit data.
pub fn reassemble(planes: &[Plane8; 3]) -> Result<RgbImage> {
    let (w, h) = (planes[0].width, planes[0].height);
    for p in planes {
        if p.width != w || p.height != h || p.values.len() != w * h {
            return Err(Error::DimensionMismatch("reassemble planes disagree".into()));
        }
    }
    let mut img = RgbImage::new(w, h)?;
    for i in 0..w * h {
        img.pixels[i] = [planes[0].values[i], planes[1].values[i], planes[2].values[i]];
    }
    Ok(img)
}

/// 8-bit channel value to one of 64 levels.
pub fn quantize64(v: u8) -> u8 {
    v / 4
}

/// Bin midpoint reconstruction of a level.
pub fn dequantize64(level: u8) -> Result<u8> {
    if level > WORD_MAX {
        return Err(Error::OutOfRange { what: "level", value: level as f64 });
    }
    Ok(level * 4 + 2)
}

pub fn quantize_plane(plane: &Plane8, tag: Channel) -> ChannelMatrix {
    ChannelMatrix {
        width: plane.width,
        height: plane.height,
        words: plane.values.iter().map(|v| quantize64(*v)).collect(),
        tag,
    }
}

pub fn dequantize_matrix(m: &ChannelMatrix) -> Result<Plane8> {
    Ok(Plane8 {
        width: m.width,
        height: m.height,
        values: m.words.iter().map(|w| dequantize64(*w)).collect::<Result<_>>()?,
    })
}

fn check_dims(array: &MolecularArray, m: &ChannelMatrix) -> Result<()> {
    m.validate()?;
    if m.width != array.geometry.cols || m.height != array.geometry.rows {
        return Err(Error::DimensionMismatch(format!(
            "matrix {}x{} vs array {}x{}",
            m.width, m.height, array.geometry.cols, array.geometry.rows
        )));
    }
    Ok(())
}

/// Writes every channel word to its (row, col, channel) unit.
pub fn store_plaintext(
    array: &mut MolecularArray,
    r: &ChannelMatrix,
    g: &ChannelMatrix,
    b: &ChannelMatrix,
) -> Result<()> {
    for m in [r, g, b] {
        check_dims(array, m)?;
    }
    let mut values = vec![0u8; array.geometry.unit_count()];
    for row in 0..array.geometry.rows {
        for col in 0..array.geometry.cols {
            let pixel = row * array.geometry.cols + col;
            for (ch, m) in [r, g, b].into_iter().enumerate() {
                values[pixel * 3 + ch] = m.words[pixel];
            }
        }
    }
    array.write_all(&values)
}

/// The stored matrices as read back from the device.
pub fn read_channels(array: &MolecularArray, noise_seed: Option<u64>) -> Result<[ChannelMatrix; 3]> {
    let words = array.read_all(noise_seed)?;
    let (w, h) = (array.geometry.cols, array.geometry.rows);
    let mut out = [
        ChannelMatrix::new(w, h, Channel::R)?,
        ChannelMatrix::new(w, h, Channel::G)?,
        ChannelMatrix::new(w, h, Channel::B)?,
    ];
    for pixel in 0..w * h {
        for ch in 0..3 {
            out[ch].words[pixel] = words[pixel * 3 + ch];
        }
    }
    Ok(out)
}

/// How each cipher word was produced, for auditing the device path.
#[derive(Debug, Clone, Copy, Default)]
pub struct XformStats {
    pub words: usize,
    pub gate_evaluations: usize,
}

/// In-situ XOR transform of the whole array against `key`: per address the
/// stored word is read, XORed bit-by-bit with the key word through six
/// single-unit gate evaluations on a scratch unit (reset between bits), and
/// the result reprogrammed into the same storage unit. Decryption is the
/// identical procedure.
pub fn xor_transform_in_situ(
    array: &mut MolecularArray,
    key: &KeyMatrix,
    noise_seed: Option<u64>,
) -> Result<XformStats> {
    for ch in Channel::all() {
        check_dims(array, key.channel(ch))?;
    }
    let params = array.params.clone();
    let codec = array.codec.clone();
    let geometry = array.geometry;

    let key_for = |idx: usize| -> u8 {
        let ch = idx % 3;
        let pixel = idx / 3;
        match ch {
            0 => key.r.words[pixel],
            1 => key.g.words[pixel],
            _ => key.b.words[pixel],
        }
    };

    let results: Vec<Result<(crate::device::UnitState, u8, usize)>> = array
        .units
        .par_iter()
        .enumerate()
        .map_init(
            || spawn_unit(&params, 0x5C8A7C8),
            |scratch, (idx, unit)| {
                let read_seed = noise_seed.map(|s| {
                    let mut sub = rng::substream(s, idx as u64);
                    sub.next_u64()
                });
                let reading = crate::codec::read_level(unit, &codec, &params, read_seed);
                if !reading.written {
                    let ch = idx % 3;
                    let pixel = idx / 3;
                    return Err(Error::Unwritten {
                        row: pixel / geometry.cols,
                        col: pixel % geometry.cols,
                        channel: ch,
                    });
                }
                let stored = reading.level;
                let kw = key_for(idx);
                let mut cipher = 0u8;
                let mut evals = 0usize;
                for bit in (0..WORD_BITS).rev() {
                    let p = (stored >> bit) & 1 == 1;
                    let q = (kw >> bit) & 1 == 1;
                    *scratch = reset_to_logic0(scratch, &params)?;
                    let out = xor_gate(scratch, p, q, &params)?;
                    *scratch = out.state.clone();
                    evals += 1;
                    cipher = (cipher << 1) | out.output;
                }
                let report = crate::codec::program_level(unit, cipher, &codec, &params)?;
                Ok((report.state, cipher, evals))
            },
        )
        .collect();

    let mut stats = XformStats::default();
    for (idx, r) in results.into_iter().enumerate() {
        let (state, cipher, evals) = r?;
        array.units[idx] = state;
        array.levels[idx] = Some(cipher);
        stats.words += 1;
        stats.gate_evaluations += evals;
    }
    Ok(stats)
}

/// Encryption is the XOR transform with the key.
pub fn encrypt_in_situ(array: &mut MolecularArray, key: &KeyMatrix, noise_seed: Option<u64>) -> Result<XformStats> {
    xor_transform_in_situ(array, key, noise_seed)
}

/// Decryption is the same involution.
pub fn decrypt_in_situ(array: &mut MolecularArray, key: &KeyMatrix, noise_seed: Option<u64>) -> Result<XformStats> {
    xor_transform_in_situ(array, key, noise_seed)
}

/// Reads all words, dequantizes and reassembles an image for inspection.
pub fn render_image(array: &MolecularArray, noise_seed: Option<u64>) -> Result<RgbImage> {
    let [r, g, b] = read_channels(array, noise_seed)?;
    reassemble(&[dequantize_matrix(&r)?, dequantize_matrix(&g)?, dequantize_matrix(&b)?])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize64(0), 0);
        assert_eq!(quantize64(255), 63);
        assert_eq!(quantize64(128), 32);
        for k in 0..64u8 {
            assert_eq!(quantize64(dequantize64(k).unwrap()), k);
        }
        assert!(dequantize64(64).is_err());
    }

    #[test]
    fn quantization_error_bound() {
        for v in 0..=255u8 {
            let back = dequantize64(quantize64(v)).unwrap();
            assert!((back as i16 - v as i16).abs() <= 2, "value {v} -> {back}");
        }
    }

    #[test]
    fn decompose_reassemble_identity() {
        let mut img = RgbImage::new(3, 2).unwrap();
        img.pixels[0] = [10, 20, 30];
        img.pixels[5] = [250, 1, 9];
        let planes = decompose_rgb(&img);
        assert_eq!(planes[0].values[0], 10);
        assert_eq!(planes[1].values[0], 20);
        assert_eq!(planes[2].values[0], 30);
        assert_eq!(reassemble(&planes).unwrap(), img);
    }

    #[test]
    fn all_black_decomposes_to_zero_planes() {
        let img = RgbImage::new(2, 2).unwrap();
        let planes = decompose_rgb(&img);
        assert!(planes.iter().all(|p| p.values.iter().all(|v| *v == 0)));
    }
}
