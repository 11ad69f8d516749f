//! Ternary and quaternary MAX / MIN / threshold operators on codec levels.
//!
//! Logic values map onto spread codec levels; MAX uses conditional
//! positive-branch-only programming (which can only raise the stored level)
//! and MIN its negative-branch dual.

use crate::codec::{program_level, read_level, LevelCodec};
use crate::device::{ModelParams, UnitState};
use crate::error::{Error, Result};

use super::LogicValue;

/// Codec levels backing each logic value of the radix.
pub fn mvl_levels(radix: u8, n_used: u8) -> Result<Vec<u8>> {
    match radix {
        3 => Ok(vec![0, n_used / 2, n_used - 1]),
        4 => {
            let q = (n_used - 1) / 3;
            Ok(vec![0, q, 2 * q, n_used - 1])
        }
        r => Err(Error::InvalidArgument(format!("mvl radix must be 3 or 4, got {r}"))),
    }
}

fn decode_value(level: u8, levels: &[u8]) -> u8 {
    let mut best = 0usize;
    let mut best_d = u8::MAX;
    for (i, l) in levels.iter().enumerate() {
        let d = level.abs_diff(*l);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best as u8
}

fn check_radix(p: LogicValue, q: LogicValue) -> Result<u8> {
    if p.radix != q.radix {
        return Err(Error::RadixMismatch(p.radix, q.radix));
    }
    Ok(p.radix)
}

/// Stores `p`, then programs toward `q`'s level with the positive branch
/// only; the stored result decodes as max(p, q). Returns the value and the
/// final read conductance.
pub fn mvl_max(
    unit: &UnitState,
    p: LogicValue,
    q: LogicValue,
    codec: &LevelCodec,
    params: &ModelParams,
) -> Result<(LogicValue, f64)> {
    let radix = check_radix(p, q)?;
    let levels = mvl_levels(radix, codec.n_used)?;
    let mut state = program_level(unit, levels[p.value as usize], codec, params)?.state;
    let stored = read_level(&state, codec, params, None).level;
    let target = levels[q.value as usize];
    if target > stored {
        let rep = program_level(&state, target, codec, params)?;
        debug_assert!(rep.waveforms.iter().all(|w| w.is_single_polarity(true)));
        state = rep.state;
    }
    let reading = read_level(&state, codec, params, None);
    let value = decode_value(reading.level, &levels);
    Ok((LogicValue::new(radix, value)?, reading.g_measured))
}

/// Dual of `mvl_max`: negative-branch-only programming can only lower the
/// stored level, so the result is min(p, q).
pub fn mvl_min(
    unit: &UnitState,
    p: LogicValue,
    q: LogicValue,
    codec: &LevelCodec,
    params: &ModelParams,
) -> Result<(LogicValue, f64)> {
    let radix = check_radix(p, q)?;
    let levels = mvl_levels(radix, codec.n_used)?;
    let mut state = program_level(unit, levels[p.value as usize], codec, params)?.state;
    let stored = read_level(&state, codec, params, None).level;
    let target = levels[q.value as usize];
    if target < stored {
        let rep = program_level(&state, target, codec, params)?;
        debug_assert!(rep.waveforms.iter().all(|w| w.is_single_polarity(false)));
        state = rep.state;
    }
    let reading = read_level(&state, codec, params, None);
    let value = decode_value(reading.level, &levels);
    Ok((LogicValue::new(radix, value)?, reading.g_measured))
}

/// Threshold comparison: reads the stored value, compares with `k` at
/// half-gap tolerance, then stores and returns radix-1 on match, 0 otherwise.
pub fn mvl_threshold(
    unit: &UnitState,
    x: LogicValue,
    k: LogicValue,
    codec: &LevelCodec,
    params: &ModelParams,
) -> Result<(LogicValue, f64)> {
    let radix = check_radix(x, k)?;
    let levels = mvl_levels(radix, codec.n_used)?;
    let state = program_level(unit, levels[x.value as usize], codec, params)?.state;
    let reading = read_level(&state, codec, params, None);
    if !reading.written {
        return Err(Error::DecodeFailure(reading.g_measured));
    }
    let stored_value = decode_value(reading.level, &levels);
    let out = if stored_value == k.value { radix - 1 } else { 0 };
    let state = program_level(&state, levels[out as usize], codec, params)?.state;
    let final_read = read_level(&state, codec, params, None);
    Ok((LogicValue::new(radix, out)?, final_read.g_measured))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::LevelCodec;
    use crate::device::spawn_unit;

    fn setup() -> (LevelCodec, ModelParams) {
        let mut p = ModelParams::calibrated();
        p.sigma_d2d = 0.0;
        (LevelCodec::default(), p)
    }

    #[test]
    fn level_spreads() {
        assert_eq!(mvl_levels(3, 64).unwrap(), vec![0, 32, 63]);
        assert_eq!(mvl_levels(4, 64).unwrap(), vec![0, 21, 42, 63]);
        assert!(mvl_levels(2, 64).is_err());
    }

    #[test]
    fn ternary_max_examples() {
        let (codec, params) = setup();
        let u = spawn_unit(&params, 11);
        let two_one = mvl_max(&u, LogicValue::new(3, 2).unwrap(), LogicValue::new(3, 1).unwrap(), &codec, &params).unwrap();
        assert_eq!(two_one.0.value, 2);
        let zz = mvl_max(&u, LogicValue::new(3, 0).unwrap(), LogicValue::new(3, 0).unwrap(), &codec, &params).unwrap();
        assert_eq!(zz.0.value, 0);
    }

    #[test]
    fn ternary_min_examples() {
        let (codec, params) = setup();
        let u = spawn_unit(&params, 12);
        let two_one = mvl_min(&u, LogicValue::new(3, 2).unwrap(), LogicValue::new(3, 1).unwrap(), &codec, &params).unwrap();
        assert_eq!(two_one.0.value, 1);
        for v in 0..3u8 {
            let same = mvl_min(&u, LogicValue::new(3, v).unwrap(), LogicValue::new(3, v).unwrap(), &codec, &params).unwrap();
            assert_eq!(same.0.value, v);
        }
    }

    #[test]
    fn threshold_table_matches_rule() {
        let (codec, params) = setup();
        let u = spawn_unit(&params, 13);
        for x in 0..3u8 {
            for k in 0..3u8 {
                let (out, _) = mvl_threshold(
                    &u,
                    LogicValue::new(3, x).unwrap(),
                    LogicValue::new(3, k).unwrap(),
                    &codec,
                    &params,
                )
                .unwrap();
                let want = if x == k { 2 } else { 0 };
                assert_eq!(out.value, want, "thr(x={x}, k={k})");
            }
        }
    }

    #[test]
    fn radix_mismatch_rejected() {
        let (codec, params) = setup();
        let u = spawn_unit(&params, 14);
        let e = mvl_max(&u, LogicValue::new(3, 1).unwrap(), LogicValue::new(4, 1).unwrap(), &codec, &params);
        assert!(matches!(e, Err(Error::RadixMismatch(3, 4))));
    }
}
