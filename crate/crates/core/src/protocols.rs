//! Measurement protocols built from the primitive operations: the dc sweep
//! regression set, the window family, uniformity statistics and the
//! multi-state retention run. Shared by the CLI and the acceptance suite.

use crate::device::{
    apply_waveform, make_dual_sweep, read_conductance, retention_evolve, spawn_unit, Branch,
    IVTrace, ModelParams, UnitState, V_READ,
};
use crate::error::Result;

/// Default dwell per sweep step, seconds.
pub const DWELL: f64 = 0.02;
/// Ramping step of the characterization sweep, volts.
pub const STEP_FINE: f64 = 0.05;
/// Ramping step of the multilevel sweep family, volts.
pub const STEP_COARSE: f64 = 0.1;

/// Runs the +-3 V dual sweep on a pristine unit and returns the trace.
pub fn characterization_sweep(params: &ModelParams) -> Result<IVTrace> {
    let wf = make_dual_sweep(3.0, STEP_FINE, DWELL)?;
    Ok(apply_waveform(&UnitState::pristine(), &wf, params, None)?.1)
}

/// Key readings of the +-3 V characterization sweep.
#[derive(Debug, Clone)]
pub struct SweepRegression {
    pub g_fwd_0v1: f64,
    pub g_fwd_0v5: f64,
    pub g_fwd_3v0: f64,
    pub crossing_v: Option<f64>,
    pub window_pos: f64,
    pub window_neg: f64,
    pub peak_power_w: f64,
    pub peak_per_molecule_w: f64,
    pub g_pristine: f64,
    pub g_end_positive: f64,
    pub g_start_negative: f64,
    pub g_end_negative: f64,
}

pub fn sweep_regression(params: &ModelParams) -> Result<SweepRegression> {
    let trace = characterization_sweep(params)?;
    let (peak, per_molecule) = trace.peak_power()?;
    let pos_bwd_last = trace
        .samples
        .iter()
        .rfind(|s| s.polarity == 1 && s.branch == Branch::Bwd)
        .map(|s| s.g)
        .unwrap_or(f64::NAN);
    let neg_first = trace.samples.iter().find(|s| s.polarity == -1).map(|s| s.g).unwrap_or(f64::NAN);
    let last = trace.samples.last().map(|s| s.g).unwrap_or(f64::NAN);
    Ok(SweepRegression {
        g_fwd_0v1: trace.g_at(0.1, Branch::Fwd)?,
        g_fwd_0v5: trace.g_at(0.5, Branch::Fwd)?,
        g_fwd_3v0: trace.g_at(3.0, Branch::Fwd)?,
        crossing_v: trace.sign_reversal_voltage(),
        window_pos: trace.memory_window(0.5)?,
        window_neg: trace.memory_window(-0.5)?,
        peak_power_w: peak,
        peak_per_molecule_w: per_molecule,
        g_pristine: read_conductance(&UnitState::pristine(), params, 0.0),
        g_end_positive: pos_bwd_last,
        g_start_negative: neg_first,
        g_end_negative: last,
    })
}

/// Memory window at the 0.5 V read for each stop voltage (fresh unit each).
pub fn window_family(params: &ModelParams, stops: &[f64]) -> Result<Vec<(f64, f64)>> {
    stops
        .iter()
        .map(|stop| {
            let wf = make_dual_sweep(*stop, STEP_COARSE, DWELL)?;
            let (_, trace) = apply_waveform(&UnitState::pristine(), &wf, params, None)?;
            Ok((*stop, trace.memory_window(0.5)?))
        })
        .collect()
}

/// Cycle-to-cycle uniformity: `repeats` noisy +-3 V sweeps on one unit; the
/// statistic is the mean over sample points of 1 - sigma/mu across repeats.
pub fn cycle_uniformity_pct(params: &ModelParams, repeats: usize, seed: u64) -> Result<f64> {
    let wf = make_dual_sweep(3.0, STEP_FINE, DWELL)?;
    let mut traces = Vec::with_capacity(repeats);
    for k in 0..repeats {
        let noise = crate::rng::substream(seed, k as u64).next_u64();
        let (_, t) = apply_waveform(&UnitState::pristine(), &wf, params, Some(noise))?;
        traces.push(t);
    }
    let n_pts = traces[0].samples.len();
    let mut acc = 0.0;
    let mut used = 0usize;
    for i in 0..n_pts {
        let vals: Vec<f64> = traces.iter().map(|t| t.samples[i].g).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        if mean.abs() < 1e-12 {
            continue;
        }
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() as f64 - 1.0);
        acc += 1.0 - var.sqrt() / mean.abs();
        used += 1;
    }
    Ok(100.0 * acc / used as f64)
}

/// Device-to-device uniformity: the zero-bias readings of `group_size`
/// seeded devices give one 1 - sigma/mu sample; the statistic is its
/// Monte-Carlo mean over `groups` disjoint device groups.
pub fn device_uniformity_pct(params: &ModelParams, group_size: usize, groups: usize, seed: u64) -> Result<f64> {
    let mut acc = 0.0;
    for g in 0..groups {
        let vals: Vec<f64> = (0..group_size)
            .map(|k| {
                let u = spawn_unit(params, seed + (g * group_size + k) as u64);
                read_conductance(&u, params, 0.0)
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / group_size as f64;
        let var =
            vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (group_size as f64 - 1.0);
        acc += 1.0 - var.sqrt() / mean.abs();
    }
    Ok(100.0 * acc / groups as f64)
}

/// One retention curve: checkpoint readings of a state over `duration_s`.
#[derive(Debug, Clone)]
pub struct RetentionCurve {
    pub stop_v: f64,
    /// (time, G at the 0.1 V read)
    pub readings: Vec<(f64, f64)>,
}

/// Programs 10 states by dual sweeps with stop voltages 1..=10 V and evolves
/// them for `duration_s`, reading at logarithmic checkpoints.
pub fn retention_run(params: &ModelParams, duration_s: f64, seed: u64) -> Result<Vec<RetentionCurve>> {
    let mut curves = Vec::new();
    for stop in 1..=10u32 {
        let wf = make_dual_sweep(stop as f64, STEP_COARSE, DWELL)?;
        let (state, _) = apply_waveform(&UnitState::pristine(), &wf, params, None)?;
        let mut readings = vec![(0.0, read_conductance(&state, params, V_READ))];
        let mut t = 1.0;
        let mut current = state;
        let mut elapsed = 0.0;
        while elapsed < duration_s {
            let t_next = (t * 10.0_f64).min(duration_s);
            current = retention_evolve(&current, t_next - elapsed, params, seed + stop as u64)?;
            elapsed = t_next;
            readings.push((elapsed, read_conductance(&current, params, V_READ)));
            t = t_next;
        }
        curves.push(RetentionCurve { stop_v: stop as f64, readings });
    }
    Ok(curves)
}

/// Worst-case |G(t) - G(0)| / |G(0)| over all curves, percent.
pub fn retention_max_fluctuation_pct(curves: &[RetentionCurve]) -> f64 {
    curves
        .iter()
        .flat_map(|c| {
            let g0 = c.readings[0].1;
            c.readings.iter().map(move |(_, g)| 100.0 * (g - g0).abs() / g0.abs())
        })
        .fold(0.0, f64::max)
}

/// True when, at every checkpoint, all curves hold pairwise distinct values
/// in an order that never changes.
pub fn retention_states_distinguishable(curves: &[RetentionCurve]) -> bool {
    if curves.is_empty() {
        return true;
    }
    let checkpoints = curves[0].readings.len();
    let order_at = |k: usize| -> Option<Vec<usize>> {
        let mut vals: Vec<(usize, f64)> = curves.iter().enumerate().map(|(i, c)| (i, c.readings[k].1)).collect();
        vals.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        for w in vals.windows(2) {
            if w[0].1 == w[1].1 {
                return None;
            }
        }
        Some(vals.into_iter().map(|(i, _)| i).collect())
    };
    let Some(reference) = order_at(0) else { return false };
    (1..checkpoints).all(|k| order_at(k).as_ref() == Some(&reference))
}
