use crate::error::{Error, Result};
use crate::rng::SplitMix64;

use super::trace::{Branch, IVTrace, TraceSample};
use super::waveform::Waveform;
use super::{ModelParams, UnitState};

/// Internal potential produced by the displaced anions, volts. Sign follows c.
pub fn builtin_potential(state: &UnitState, params: &ModelParams) -> f64 {
    params.kappa * state.c
}

/// Deterministic junction current at applied bias `v`, amperes.
///
/// The molecular channel saturates over the scale `v_decay`; an ohmic leak
/// rides on top. Both are driven by the net field `v - kappa * c`.
pub fn instantaneous_current(state: &UnitState, v: f64, params: &ModelParams) -> f64 {
    let v_net = v - params.kappa * state.c;
    let g_mol = params.g_mol(state.x, state.device_factor);
    let sign = if v_net >= 0.0 { 1.0 } else { -1.0 };
    let chan = g_mol * params.v_decay * sign * (1.0 - (-v_net.abs() / params.v_decay).exp());
    chan + params.g_leak * v_net
}

/// Advances the state by `dt` seconds under constant bias `v` with forward
/// Euler, substepping internally so the trajectory is step-size converged.
/// At exactly 0 V both state variables are frozen (nonvolatility).
pub fn step_dynamics(state: &UnitState, v: f64, dt: f64, params: &ModelParams) -> Result<UnitState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("dt must be > 0, got {dt}")));
    }
    if !v.is_finite() {
        return Err(Error::InvalidArgument("non-finite voltage".into()));
    }
    let mut out = state.clone();
    if v == 0.0 {
        out.elapsed_s += dt;
        return Ok(out);
    }
    let rate_x = params.k_ox.max(params.k_red) * (v.abs() + params.kappa);
    let mut h_max = params.tau_c / 25.0;
    if rate_x > 0.0 {
        h_max = h_max.min(1.0 / (25.0 * rate_x));
    }
    // cap the per-substep displacement move so trims land finely
    let c_dist = (params.c_sat * (v / params.v_c).tanh() - state.c).abs();
    if c_dist > 0.0 {
        h_max = h_max.min(params.tau_c * 0.004 / c_dist);
    }
    let n = (dt / h_max).ceil().max(1.0) as u64;
    let h = dt / n as f64;
    for _ in 0..n {
        let target = params.c_sat * (v / params.v_c).tanh();
        out.c += (target - out.c) / params.tau_c * h;
        let v_net = v - params.kappa * out.c;
        if v_net >= 0.0 {
            out.x += params.k_ox * v_net * (1.0 - out.x) * h;
        } else {
            out.x -= params.k_red * (-v_net) * out.x * h;
        }
        out.clamp();
    }
    out.elapsed_s += dt;
    Ok(out)
}

fn effective_read_voltage(v: f64, polarity: i8, eps: f64) -> f64 {
    if v.abs() >= eps {
        v
    } else if v != 0.0 {
        v.signum() * eps
    } else {
        polarity as f64 * eps
    }
}

/// Drives the unit through `wf`, sampling the current after each dwell.
/// With `noise_seed` given, every current sample carries an independent
/// multiplicative lognormal factor of sigma `sigma_c2c`.
pub fn apply_waveform(
    state: &UnitState,
    wf: &Waveform,
    params: &ModelParams,
    noise_seed: Option<u64>,
) -> Result<(UnitState, IVTrace)> {
    wf.validate()?;
    let mut rng = noise_seed.map(SplitMix64::new);
    let mut s = state.clone();
    let mut trace = IVTrace::default();
    for p in wf.expand() {
        s = if p.v == 0.0 {
            let mut frozen = s;
            frozen.elapsed_s += p.dwell_s;
            frozen
        } else {
            step_dynamics(&s, p.v, p.dwell_s, params)?
        };
        let v_eff = effective_read_voltage(p.v, p.polarity, params.eps_read);
        let mut i = instantaneous_current(&s, v_eff, params);
        if let Some(r) = rng.as_mut() {
            i *= r.next_lognormal(params.sigma_c2c);
        }
        trace.samples.push(TraceSample {
            time_s: s.elapsed_s,
            v_applied: p.v,
            i,
            g: i / v_eff,
            branch: if p.forward { Branch::Fwd } else { Branch::Bwd },
            polarity: p.polarity,
        });
    }
    Ok((s, trace))
}

/// Signed conductance at the read probe, side-effect-free on the state.
/// Readings nominally at 0 V are evaluated at `eps_read` with the sign of
/// the requested probe.
pub fn read_conductance(state: &UnitState, params: &ModelParams, v_read: f64) -> f64 {
    let sign: i8 = if v_read >= 0.0 { 1 } else { -1 };
    let v_eff = effective_read_voltage(v_read, sign, params.eps_read);
    instantaneous_current(state, v_eff, params) / v_eff
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::super::{make_dual_sweep, make_sweep, spawn_unit, X_PRISTINE};
    use super::*;

    fn seed_params() -> ModelParams {
        ModelParams::seed()
    }

    fn pristine() -> UnitState {
        UnitState::pristine()
    }

    #[test]
    fn builtin_potential_examples() {
        let mut p = seed_params();
        p.kappa = 3.05;
        let mut u = pristine();
        assert_eq!(builtin_potential(&u, &p), 0.0);
        u.c = 0.95;
        assert_relative_eq!(builtin_potential(&u, &p), 2.8975, max_relative = 1e-12);
        u.c = -0.95;
        assert_relative_eq!(builtin_potential(&u, &p), -2.8975, max_relative = 1e-12);
    }

    #[test]
    fn pristine_current_drop_points() {
        // Seed constants reproduce the dc G-drop readings of a fresh unit.
        let p = seed_params();
        let u = pristine();
        let g = |v: f64| instantaneous_current(&u, v, &p) / v;
        assert_relative_eq!(g(0.1), 1.20e-9, max_relative = 0.03);
        assert_relative_eq!(g(0.5), 0.24e-9, max_relative = 0.10);
        assert_relative_eq!(g(3.0), 0.06e-9, max_relative = 0.01);
        let i = instantaneous_current(&u, 0.1, &p);
        assert_relative_eq!(i, 120e-12, max_relative = 0.03);
    }

    #[test]
    fn polarity_symmetry_exact() {
        let p = ModelParams::calibrated();
        let u = UnitState { x: 0.5, c: 0.0, device_factor: 1.0, elapsed_s: 0.0 };
        for v in [0.05, 0.1, 0.73, 1.5, 3.0, 8.2] {
            let ip = instantaneous_current(&u, v, &p);
            let im = instantaneous_current(&u, -v, &p);
            assert_eq!(ip, -im);
        }
    }

    #[test]
    fn monotone_saturation() {
        let p = ModelParams::calibrated();
        let u = UnitState { x: 0.5, c: 0.0, device_factor: 1.0, elapsed_s: 0.0 };
        let mut last_i = 0.0;
        let mut last_g = f64::INFINITY;
        let mut v = p.eps_read;
        while v < 10.0 {
            let i = instantaneous_current(&u, v, &p).abs();
            let g = i / v;
            assert!(i >= last_i, "current not monotone at {v}");
            assert!(g <= last_g + 1e-18, "conductance not nonincreasing at {v}");
            last_i = i;
            last_g = g;
            v += 0.01;
        }
    }

    #[test]
    fn zero_bias_freezes_state() {
        let p = ModelParams::calibrated();
        let u = UnitState { x: 0.7, c: 0.4, device_factor: 1.0, elapsed_s: 0.0 };
        let after = step_dynamics(&u, 0.0, 123.0, &p).unwrap();
        assert_eq!(after.x, u.x);
        assert_eq!(after.c, u.c);
        assert_eq!(after.elapsed_s, 123.0);
    }

    #[test]
    fn bad_dt_rejected() {
        let p = ModelParams::calibrated();
        assert!(step_dynamics(&pristine(), 1.0, 0.0, &p).is_err());
        assert!(step_dynamics(&pristine(), 1.0, -2.0, &p).is_err());
        assert!(step_dynamics(&pristine(), f64::NAN, 0.1, &p).is_err());
    }

    #[test]
    fn displacement_approaches_drift_target() {
        // Long dwell at +3 V pulls c to c_sat * tanh(3 / v_c).
        let p = ModelParams::calibrated();
        let mut u = pristine();
        for _ in 0..400 {
            u = step_dynamics(&u, 3.0, 0.02, &p).unwrap();
        }
        let target = p.c_sat * (3.0 / p.v_c).tanh();
        assert_relative_eq!(u.c, target, max_relative = 1e-3);
        assert!(target > 0.8, "accumulation should be substantial, got {target}");
    }

    #[test]
    fn long_positive_conditioning_oxidizes() {
        // The conditioned-state anchor x ~ 0.732 is reached under sustained bias.
        let p = ModelParams::calibrated();
        let mut u = pristine();
        let mut t = 0.0;
        while u.x < 0.732 && t < 5000.0 {
            u = step_dynamics(&u, 3.0, 1.0, &p).unwrap();
            t += 1.0;
        }
        assert!(u.x >= 0.732, "x stalled at {} after {t} s", u.x);
    }

    #[test]
    fn state_clamping_under_overdrive() {
        let p = ModelParams::calibrated();
        let mut u = pristine();
        for _ in 0..2000 {
            u = step_dynamics(&u, 10.0, 0.05, &p).unwrap();
        }
        assert!(u.x <= 1.0 && u.x >= 0.0);
        assert!(u.c <= 1.0 && u.c >= -1.0);
        for _ in 0..2000 {
            u = step_dynamics(&u, -10.0, 0.05, &p).unwrap();
        }
        assert!(u.x <= 1.0 && u.x >= 0.0);
        assert!(u.c >= -1.0 && u.c <= 1.0);
    }

    #[test]
    fn euler_step_size_convergence() {
        // dt and dt/10 trajectories agree in the final state within 1%.
        let p = ModelParams::calibrated();
        let mut coarse = pristine();
        let mut fine = pristine();
        for _ in 0..50 {
            coarse = step_dynamics(&coarse, 2.0, 0.02, &p).unwrap();
            for _ in 0..10 {
                fine = step_dynamics(&fine, 2.0, 0.002, &p).unwrap();
            }
        }
        assert_relative_eq!(coarse.c, fine.c, max_relative = 0.01);
        assert_relative_eq!(coarse.x, fine.x, max_relative = 0.01);
    }

    #[test]
    fn zero_waveform_is_identity() {
        let p = ModelParams::calibrated();
        let mut wf = Waveform::new("rest");
        wf.push(0.0, 0.1, 0.02).push(0.0, 0.1, 0.02);
        let u = UnitState { x: 0.6, c: 0.3, device_factor: 1.0, elapsed_s: 0.0 };
        let (after, trace) = apply_waveform(&u, &wf, &p, None).unwrap();
        assert_eq!(after.x, u.x);
        assert_eq!(after.c, u.c);
        // samples at 0 V carry only the eps-probe current, and no power
        assert!(trace.samples.iter().all(|s| s.i.abs() < 1e-9 && (s.i * s.v_applied) == 0.0));
    }

    #[test]
    fn same_seed_bit_identical_traces() {
        let p = ModelParams::calibrated();
        let wf = make_sweep(0.0, 1.0, 0.1, 0.02, true).unwrap();
        let (_, t1) = apply_waveform(&pristine(), &wf, &p, Some(42)).unwrap();
        let (_, t2) = apply_waveform(&pristine(), &wf, &p, Some(42)).unwrap();
        for (a, b) in t1.samples.iter().zip(&t2.samples) {
            assert_eq!(a.i, b.i);
            assert_eq!(a.g, b.g);
        }
        let (_, t3) = apply_waveform(&pristine(), &wf, &p, Some(43)).unwrap();
        assert!(t1.samples.iter().zip(&t3.samples).any(|(a, b)| a.i != b.i));
    }

    #[test]
    fn dual_sweep_reverses_sign_on_back_branch() {
        let p = ModelParams::calibrated();
        let wf = make_dual_sweep(3.0, 0.05, 0.02).unwrap();
        let (_, trace) = apply_waveform(&pristine(), &wf, &p, None).unwrap();
        let v_rev = trace.sign_reversal_voltage().expect("no sign reversal found");
        assert!((2.5..3.1).contains(&v_rev), "reversal at {v_rev} V");
    }

    #[test]
    fn positive_cycle_ends_negative_at_zero_bias() {
        let p = ModelParams::calibrated();
        let wf = make_sweep(0.0, 3.0, 0.05, 0.02, true).unwrap();
        let (after, _) = apply_waveform(&pristine(), &wf, &p, None).unwrap();
        let g_end = read_conductance(&after, &p, 0.0);
        assert!(g_end < 0.0, "post-cycle zero-bias reading {g_end:.3e}");
        assert!(g_end.abs() > 36.18e-9 / 3.0 && g_end.abs() < 36.18e-9 * 3.0);
    }

    #[test]
    fn read_is_side_effect_free() {
        let p = ModelParams::calibrated();
        let u = UnitState { x: 0.6, c: 0.5, device_factor: 1.0, elapsed_s: 0.0 };
        let before = u.clone();
        let _ = read_conductance(&u, &p, 0.1);
        assert_eq!(u, before);
    }

    #[test]
    fn pristine_zero_bias_reading() {
        let p = ModelParams::calibrated();
        let g = read_conductance(&spawn_unit(&p, 0), &p, 0.0);
        assert!(g > 0.0);
        // order of the initial-conductance anchor, factor 3
        assert!(g > 14.5e-9 / 3.0 && g < 14.5e-9 * 3.0, "pristine G {g}");
        assert_eq!(spawn_unit(&p, 0).x, X_PRISTINE);
    }
}
