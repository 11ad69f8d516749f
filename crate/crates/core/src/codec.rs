//! Multilevel codec: maps 6-bit values onto programming stop voltages and
//! conductance targets, with closed-loop program-and-verify writing.
//!
//! Levels are carried by the anion displacement on a strongly oxidized
//! platform (the channel term is parked low once per unit by a conditioning
//! waveform, after which the displacement alone spans the ladder). Level
//! readings at the +0.1 V probe are negative-signed because the build-in
//! potential exceeds the probe; a positive-signed reading therefore marks a
//! never-formatted unit.

use std::path::Path;

use crate::device::{
    apply_waveform, instantaneous_current, read_conductance, ModelParams, UnitState, Waveform, V_READ,
};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Oxidation platform established by the format waveform.
pub const X_PLATFORM: f64 = 0.95;
/// Samples averaged by the triangle read (966 ms read waveform).
pub const READ_AVG_SAMPLES: u32 = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct LevelCodec {
    /// Total programmable states of the ladder.
    pub n_states: u8,
    /// Levels used for 6-bit data encoding.
    pub n_used: u8,
    /// Stop-voltage ladder base, volts.
    pub v_base: f64,
    /// Stop-voltage ladder pitch, volts per level.
    pub v_step: f64,
    /// Read target at level 0, siemens (magnitude at the +0.1 V probe).
    pub g_lo: f64,
    /// Read target at the top used level, siemens.
    pub g_hi: f64,
    /// Relative conductance tolerance of the verify loop.
    pub verify_tol: f64,
    /// Verify loop attempt cap.
    pub max_iters: u32,
}

impl Default for LevelCodec {
    fn default() -> Self {
        LevelCodec {
            n_states: 96,
            n_used: 64,
            v_base: 0.5,
            v_step: 0.1,
            g_lo: 0.4e-9,
            g_hi: 7.3e-9,
            verify_tol: 0.02,
            max_iters: 8,
        }
    }
}

/// Decoded read of one unit.
#[derive(Debug, Clone, Copy)]
pub struct LevelReading {
    pub level: u8,
    pub g_measured: f64,
    /// Relative distance to the nearest level target.
    pub residual: f64,
    /// False when the reading sits in the never-formatted (positive) zone.
    pub written: bool,
}

/// Which branch a programming attempt used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Positive,
    Negative,
}

/// Outcome of a closed-loop write.
#[derive(Debug, Clone)]
pub struct ProgramReport {
    pub state: UnitState,
    /// None when the target was already stored and no waveform was issued.
    pub polarity: Option<Polarity>,
    pub attempts: u32,
    pub final_reading: LevelReading,
    /// Every waveform issued, for trace audits.
    pub waveforms: Vec<Waveform>,
}

impl LevelCodec {
    pub fn validate(&self) -> Result<()> {
        if self.n_used > self.n_states {
            return Err(Error::InvalidArgument(format!(
                "n_used {} exceeds n_states {}",
                self.n_used, self.n_states
            )));
        }
        let v_top = self.v_base + self.v_step * (self.n_used as f64 - 1.0);
        if v_top > 10.0 + 1e-9 {
            return Err(Error::InvalidArgument(format!("ladder top voltage {v_top} exceeds 10 V")));
        }
        if !(self.g_lo > 0.0 && self.g_hi > self.g_lo) {
            return Err(Error::InvalidArgument("need 0 < g_lo < g_hi".into()));
        }
        if !(self.verify_tol > 0.0) || self.max_iters == 0 {
            return Err(Error::InvalidArgument("verify_tol must be > 0 and max_iters >= 1".into()));
        }
        Ok(())
    }

    /// Programming stop voltage of a data value: `v_base + v_step * value`.
    pub fn level_to_voltage(&self, value: u8) -> Result<f64> {
        if value >= self.n_used {
            return Err(Error::OutOfRange { what: "level", value: value as f64 });
        }
        Ok(self.v_base + self.v_step * value as f64)
    }

    /// Read target of a data value, linear over the used levels.
    pub fn level_to_conductance(&self, value: u8) -> Result<f64> {
        if value >= self.n_used {
            return Err(Error::OutOfRange { what: "level", value: value as f64 });
        }
        Ok(self.g_lo + value as f64 * (self.g_hi - self.g_lo) / (self.n_used as f64 - 1.0))
    }

    /// Read target of a raw ladder state (full `n_states` staircase).
    pub fn state_to_conductance(&self, state: u8) -> Result<f64> {
        if state >= self.n_states {
            return Err(Error::OutOfRange { what: "state", value: state as f64 });
        }
        Ok(self.g_lo + state as f64 * (self.g_hi - self.g_lo) / (self.n_states as f64 - 1.0))
    }

    pub fn state_to_voltage(&self, state: u8) -> Result<f64> {
        if state >= self.n_states {
            return Err(Error::OutOfRange { what: "state", value: state as f64 });
        }
        Ok(self.v_base + self.v_step * state as f64)
    }

    fn nearest_level(&self, g_mag: f64) -> (u8, f64) {
        let pitch = (self.g_hi - self.g_lo) / (self.n_used as f64 - 1.0);
        let raw = (g_mag - self.g_lo) / pitch;
        // ties break toward the lower level
        let mut level = raw.round();
        if (raw - raw.floor() - 0.5).abs() < 1e-12 {
            level = raw.floor();
        }
        let level = level.clamp(0.0, self.n_used as f64 - 1.0) as u8;
        let target = self.g_lo + level as f64 * pitch;
        (level, (g_mag - target).abs() / target)
    }

    pub fn to_key_value(&self) -> String {
        format!(
            "n_states = {}\nn_used = {}\nv_base = {:.16e}\nv_step = {:.16e}\ng_lo = {:.16e}\ng_hi = {:.16e}\nverify_tol = {:.16e}\nmax_iters = {}\n",
            self.n_states, self.n_used, self.v_base, self.v_step, self.g_lo, self.g_hi, self.verify_tol, self.max_iters
        )
    }

    pub fn from_key_value(text: &str) -> Result<Self> {
        let mut c = LevelCodec::default();
        let mut offset = 0usize;
        for line in text.lines() {
            let t = line.trim();
            if !t.is_empty() && !t.starts_with('#') {
                let (k, v) = t
                    .split_once('=')
                    .ok_or(Error::Parse { offset, msg: format!("expected key = value, got {t:?}") })?;
                let v = v.trim();
                let bad = |e: std::num::ParseFloatError| Error::Parse { offset, msg: e.to_string() };
                let badi = |e: std::num::ParseIntError| Error::Parse { offset, msg: e.to_string() };
                match k.trim() {
                    "n_states" => c.n_states = v.parse().map_err(badi)?,
                    "n_used" => c.n_used = v.parse().map_err(badi)?,
                    "v_base" => c.v_base = v.parse().map_err(bad)?,
                    "v_step" => c.v_step = v.parse().map_err(bad)?,
                    "g_lo" => c.g_lo = v.parse().map_err(bad)?,
                    "g_hi" => c.g_hi = v.parse().map_err(bad)?,
                    "verify_tol" => c.verify_tol = v.parse().map_err(bad)?,
                    "max_iters" => c.max_iters = v.parse().map_err(badi)?,
                    other => return Err(Error::Parse { offset, msg: format!("unknown codec key {other:?}") }),
                }
            }
            offset += line.len() + 1;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::util::write_atomic(path, self.to_key_value().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_key_value(&std::fs::read_to_string(path)?)
    }
}

/// Averaged conductance measurement at the +0.1 V probe. The instrument's
/// triangle read (966 ms) yields many current samples; averaging them thins
/// the cycle-to-cycle noise enough to separate adjacent levels.
pub fn read_g_averaged(unit: &UnitState, params: &ModelParams, noise_seed: Option<u64>) -> f64 {
    let g = read_conductance(unit, params, V_READ);
    match noise_seed {
        None => g,
        Some(seed) => {
            let mut rng = SplitMix64::new(seed);
            let mut acc = 0.0;
            for _ in 0..READ_AVG_SAMPLES {
                acc += rng.next_lognormal(params.sigma_c2c);
            }
            g * acc / READ_AVG_SAMPLES as f64
        }
    }
}

/// Decodes the stored level: nearest ladder target by relative distance,
/// ties toward the lower level. Side-effect-free.
pub fn read_level(unit: &UnitState, codec: &LevelCodec, params: &ModelParams, noise_seed: Option<u64>) -> LevelReading {
    let g = read_g_averaged(unit, params, noise_seed);
    let (level, residual) = codec.nearest_level(g.abs());
    // a formatted, level-holding unit always reads negative at the probe
    LevelReading { level, g_measured: g, residual, written: g < 0.0 }
}

fn is_formatted(unit: &UnitState) -> bool {
    unit.x >= 0.88
}

/// Long positive conditioning that parks the oxidation platform, followed by
/// a short settle that leaves the displacement near the ladder bottom.
fn format_waveform(params: &ModelParams) -> Waveform {
    let mut wf = Waveform::new("format");
    // strong positive push: net field stays ~ v - kappa*c_sat
    let hold = ((0.45_f64.ln() - (1.0 - X_PLATFORM).ln()) / (params.k_ox * 2.8)).max(1.0);
    let chunks = (hold / 0.5).ceil() as usize;
    wf.push(6.0, 0.5, 0.02);
    for _ in 0..chunks {
        wf.push(6.0, 0.5, hold / chunks as f64);
    }
    wf.push(0.0, 0.5, 0.02);
    // drain most of the displacement so every level is approached from below
    wf.push(-0.35, 0.35, 0.12);
    wf.push(0.0, 0.35, 1e-3);
    wf
}

/// Ensures the oxidation platform is in place (first write formats the unit).
pub fn ensure_formatted(
    unit: &UnitState,
    params: &ModelParams,
    waveforms: &mut Vec<Waveform>,
) -> Result<UnitState> {
    if is_formatted(unit) {
        return Ok(unit.clone());
    }
    let wf = format_waveform(params);
    let (state, _) = apply_waveform(unit, &wf, params, None)?;
    waveforms.push(wf);
    if !is_formatted(&state) {
        return Err(Error::ProgramFailure { target: 0, last_g: read_conductance(&state, params, V_READ), residual: f64::INFINITY, iters: 0 });
    }
    Ok(state)
}

/// Solves the displacement that reads as `g_target` on the current platform.
fn target_displacement(unit: &UnitState, params: &ModelParams, g_target: f64) -> f64 {
    // bisection on |G(0.1)| as a function of c over the positive ladder zone
    let g_of = |c: f64| {
        let probe = UnitState { c, ..unit.clone() };
        instantaneous_current(&probe, V_READ, params).abs() / V_READ
    };
    let (mut lo, mut hi) = (V_READ / params.kappa + 1e-6, 0.999);
    if g_of(hi) < g_target {
        return hi;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if g_of(mid) < g_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// First-order decay time from `c0` to `goal` under drift target `target`,
/// or None when the goal is not on the decay path.
fn settle_time(c0: f64, goal: f64, target: f64, tau: f64) -> Option<f64> {
    let num = c0 - target;
    let den = goal - target;
    if num * den > 0.0 && (num / den) > 1.0 {
        Some(tau * (num / den).ln())
    } else {
        None
    }
}

/// Dwell spent at the hold level by the ramp-on and ramp-off samples.
const TRIM_RAMP_DWELL: f64 = 2e-4;

/// One single-polarity programming waveform aimed at displacement `c_goal`.
/// Within the positive branch the hold bias is chosen so its drift target
/// sits just beyond the goal in the direction of travel, so the first-order
/// response lands on the goal without ever reversing polarity.
fn trim_waveform(unit: &UnitState, params: &ModelParams, c_goal: f64, up: bool) -> Waveform {
    let mut wf = Waveform::new(if up { "trim up" } else { "trim down" });
    let c0 = unit.c;
    let (v_hold, t) = if up {
        let frac = if c_goal >= c0 {
            (c_goal * 1.02 / params.c_sat).min(0.999)
        } else {
            (c_goal * 0.98 / params.c_sat).max(1e-4)
        };
        let v_hold = (params.v_c * frac.atanh()).clamp(0.02, 10.0);
        let target = params.c_sat * (v_hold / params.v_c).tanh();
        let t = settle_time(c0, c_goal, target, params.tau_c).unwrap_or(3.0 * params.tau_c);
        (v_hold, t)
    } else {
        // grade the drive with the remaining drop so the approach slows
        // near the goal; a negative back-scan cannot recover an overshoot
        let drop = (c0 - c_goal).max(0.0);
        let target_mag = (0.35 * drop + 0.004).min(0.21);
        let v_hold = -(params.v_c * (target_mag / params.c_sat).atanh()).max(0.005);
        let target = params.c_sat * (v_hold / params.v_c).tanh();
        let t = settle_time(c0, c_goal, target, params.tau_c).unwrap_or(0.0);
        (v_hold, t)
    };
    let t = (t - TRIM_RAMP_DWELL).clamp(1e-4, 10.0);
    let step = v_hold.abs().max(0.1);
    let chunks = (t / 0.1).ceil().max(1.0) as usize;
    wf.push(v_hold, step, 1e-4);
    for _ in 0..chunks {
        wf.push(v_hold, step, t / chunks as f64);
    }
    wf.push(0.0, step, 1e-4);
    wf
}

/// Closed-loop write: read, pick the branch from the level comparison,
/// program, verify, retry with a proportionally trimmed aim point.
pub fn program_level(
    unit: &UnitState,
    value: u8,
    codec: &LevelCodec,
    params: &ModelParams,
) -> Result<ProgramReport> {
    program_to_conductance(unit, value, codec.level_to_conductance(value)?, Some(value), codec, params)
}

/// Same loop, but aimed at one of the raw `n_states` staircase targets
/// (those sit between data levels, so no decode requirement applies).
pub fn program_state(
    unit: &UnitState,
    state_index: u8,
    codec: &LevelCodec,
    params: &ModelParams,
) -> Result<ProgramReport> {
    program_to_conductance(unit, state_index, codec.state_to_conductance(state_index)?, None, codec, params)
}

fn program_to_conductance(
    unit: &UnitState,
    value: u8,
    g_target: f64,
    require_decode: Option<u8>,
    codec: &LevelCodec,
    params: &ModelParams,
) -> Result<ProgramReport> {
    let mut waveforms = Vec::new();
    let was_formatted = is_formatted(unit);
    let mut state = ensure_formatted(unit, params, &mut waveforms)?;

    // idempotence: already stored and inside tolerance -> no waveform
    let reading = read_level(&state, codec, params, None);
    let idle_tol = {
        let pitch = (codec.g_hi - codec.g_lo) / (codec.n_used as f64 - 1.0);
        codec.verify_tol.min(0.25 * pitch / g_target)
    };
    if was_formatted
        && reading.written
        && reading.level == value
        && (reading.g_measured.abs() - g_target).abs() / g_target <= idle_tol
    {
        return Ok(ProgramReport { state, polarity: None, attempts: 0, final_reading: reading, waveforms });
    }

    let up = reading.g_measured.abs() < g_target || !reading.written || !was_formatted;
    let polarity = if up { Polarity::Positive } else { Polarity::Negative };

    // down-writes deliberately stop short of the goal and creep in, since a
    // negative back-scan cannot raise the displacement again
    const DOWN_MARGINS: [f64; 8] = [0.10, 0.03, 0.01, 0.003, 0.001, 0.0, 0.0, 0.0];
    // a data write must land clear of the decode boundaries, which are
    // tighter than verify_tol near the top of the ladder
    let goal_tol = match require_decode {
        Some(_) => {
            let pitch = (codec.g_hi - codec.g_lo) / (codec.n_used as f64 - 1.0);
            codec.verify_tol.min(0.25 * pitch / g_target)
        }
        None => codec.verify_tol,
    };
    let mut last_reading = reading;
    for attempt in 1..=codec.max_iters {
        let c_goal = target_displacement(&state, params, g_target);
        let aim = if up {
            c_goal
        } else {
            let margin = DOWN_MARGINS[(attempt as usize - 1).min(DOWN_MARGINS.len() - 1)];
            c_goal + margin * (state.c - c_goal).max(0.0)
        };
        let wf = trim_waveform(&state, params, aim, up);
        let (next, _) = apply_waveform(&state, &wf, params, None)?;
        waveforms.push(wf);
        state = next;
        last_reading = read_level(&state, codec, params, None);
        let err = (last_reading.g_measured.abs() - g_target) / g_target;
        // data writes need the tolerance AND an unambiguous decode: near the
        // top of the ladder the relative half-gap is tighter than verify_tol
        let decode_ok = match require_decode {
            Some(level) => last_reading.written && last_reading.level == level,
            None => true,
        };
        if err.abs() <= goal_tol && decode_ok {
            return Ok(ProgramReport {
                state,
                polarity: Some(polarity),
                attempts: attempt,
                final_reading: last_reading,
                waveforms,
            });
        }
    }
    Err(Error::ProgramFailure {
        target: value,
        last_g: last_reading.g_measured,
        residual: (last_reading.g_measured.abs() - g_target).abs() / g_target,
        iters: codec.max_iters,
    })
}

/// Staircase quality metrics: the coefficient of determination of a linear
/// fit of G vs level over all readings, and the mean repeat uniformity
/// (1 - sigma/mu, percent) over levels read more than once.
pub fn staircase_metrics(readings: &[(u8, f64)]) -> Result<(f64, f64)> {
    if readings.len() < 3 {
        return Err(Error::InvalidArgument(format!("need >= 3 readings, got {}", readings.len())));
    }
    let n = readings.len() as f64;
    let sx: f64 = readings.iter().map(|r| r.0 as f64).sum();
    let sy: f64 = readings.iter().map(|r| r.1).sum();
    let sxx: f64 = readings.iter().map(|r| (r.0 as f64) * (r.0 as f64)).sum();
    let sxy: f64 = readings.iter().map(|r| (r.0 as f64) * r.1).sum();
    let denom = n * sxx - sx * sx;
    let (slope, intercept) = if denom.abs() < 1e-300 {
        (0.0, sy / n)
    } else {
        let b = (n * sxy - sx * sy) / denom;
        (b, (sy - b * sx) / n)
    };
    let mean_y = sy / n;
    let ss_tot: f64 = readings.iter().map(|r| (r.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = readings.iter().map(|r| (r.1 - slope * r.0 as f64 - intercept).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };

    // repeat uniformity per level
    let mut uniformities = Vec::new();
    let mut by_level: std::collections::BTreeMap<u8, Vec<f64>> = Default::default();
    for (lvl, g) in readings {
        by_level.entry(*lvl).or_default().push(*g);
    }
    for vals in by_level.values() {
        if vals.len() >= 2 {
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (vals.len() as f64 - 1.0);
            uniformities.push(1.0 - var.sqrt() / m.abs());
        }
    }
    let uniformity_pct = if uniformities.is_empty() {
        100.0
    } else {
        100.0 * uniformities.iter().sum::<f64>() / uniformities.len() as f64
    };
    Ok((r2, uniformity_pct))
}
