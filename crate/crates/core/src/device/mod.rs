//! Two-variable phenomenological compact model of one molecular hard-disk unit.
//!
//! The unit state couples a redox coordinate `x` (fraction of metal centers in
//! the trivalent form) with a normalized anion displacement `c`. Displaced
//! anions build an internal potential `kappa * c` that offsets the applied
//! field, which is what produces the signed conductance readings and the
//! symmetric switching behavior.

mod calibrate;
mod model;
mod params_io;
mod trace;
mod waveform;

pub use calibrate::{
    calibrate, evaluate_observable, reference_targets, CalTarget, CalibrationResult, Observable,
    ResidualRow,
};
pub use model::{apply_waveform, builtin_potential, instantaneous_current, read_conductance, step_dynamics};
pub use trace::{Branch, IVTrace, TraceSample};
pub use waveform::{make_dual_sweep, make_pulse, make_sweep, Segment, Waveform};

use crate::error::{Error, Result};
use crate::rng::{substream, SplitMix64};

/// Oxidation fraction of a pristine (mixed-valent) unit.
pub const X_PRISTINE: f64 = 0.511;
/// Oxidation fraction after strong positive conditioning.
pub const X_CONDITIONED: f64 = 0.732;
/// Molecules in one tip-addressed storage unit.
pub const MOLECULES_PER_UNIT: f64 = 235.0;
/// Default read probe voltage, volts.
pub const V_READ: f64 = 0.1;

/// Physical state of a single unit.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitState {
    /// Oxidation fraction in [0, 1].
    pub x: f64,
    /// Normalized anion displacement in [-1, 1]; +1 = fully at the top surface.
    pub c: f64,
    /// Device-to-device conductance factor, > 0, fixed at creation.
    pub device_factor: f64,
    /// Simulated wall time, seconds.
    pub elapsed_s: f64,
}

impl UnitState {
    pub fn pristine() -> Self {
        UnitState { x: X_PRISTINE, c: 0.0, device_factor: 1.0, elapsed_s: 0.0 }
    }

    pub(crate) fn clamp(&mut self) {
        self.x = self.x.clamp(0.0, 1.0);
        self.c = self.c.clamp(-1.0, 1.0);
    }
}

/// Calibrated constants of the compact model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Zero-bias molecular conductance in the fully reduced state, siemens.
    pub g_red: f64,
    /// Fractional conductance reduction per unit oxidation.
    pub alpha_ox: f64,
    /// Current-saturation voltage scale, volts.
    pub v_decay: f64,
    /// Ohmic leak conductance, siemens.
    pub g_leak: f64,
    /// Build-in potential coefficient, volts (V_bi = kappa * c).
    pub kappa: f64,
    /// Saturation displacement, <= 1.
    pub c_sat: f64,
    /// Ion-drift voltage scale, volts.
    pub v_c: f64,
    /// Ion-drift time constant, seconds.
    pub tau_c: f64,
    /// Oxidation rate constant, 1/(V s).
    pub k_ox: f64,
    /// Reduction rate constant, 1/(V s).
    pub k_red: f64,
    /// Cycle-to-cycle multiplicative read-noise sigma.
    pub sigma_c2c: f64,
    /// Device-to-device lognormal sigma.
    pub sigma_d2d: f64,
    /// Retention drift noise scale (stationary sigma of the OU excursion).
    pub drift_sigma: f64,
    /// Retention drift correlation time, seconds.
    pub drift_tau: f64,
    /// Near-zero read voltage for "0 V" readings, volts.
    pub eps_read: f64,
}

impl ModelParams {
    /// The shipped parameter set, fitted against the dc-sweep sampling points,
    /// conductance windows, peak power and the multilevel ladder at once.
    pub fn calibrated() -> Self {
        ModelParams {
            g_red: 3.775616084489956e-8,
            alpha_ox: 0.86,
            v_decay: 5.0e-3,
            g_leak: 2.74430857e-10,
            kappa: 3.30,
            c_sat: 0.930649823,
            v_c: 2.02714030,
            tau_c: 9.43110029e-2,
            k_ox: 5.0e-3,
            k_red: 5.0e-3,
            sigma_c2c: 0.0141,
            sigma_d2d: 0.0305,
            drift_sigma: 5.0e-7,
            drift_tau: 100.0,
            eps_read: 5.0e-3,
        }
    }

    /// Starting point for calibration: the hand-derived seed constants.
    pub fn seed() -> Self {
        ModelParams {
            g_red: 14.5e-9 / (1.0 - 0.6 * X_PRISTINE), // G_mol(pristine) = 14.5 nS
            alpha_ox: 0.6,
            v_decay: 8.28e-3,
            g_leak: 20.0e-12,
            kappa: 3.05,
            c_sat: 0.95,
            v_c: 2.0,
            tau_c: 0.1,
            k_ox: 5.0e-3,
            k_red: 5.0e-3,
            ..Self::calibrated()
        }
    }

    /// Molecular channel conductance at oxidation fraction `x`.
    pub fn g_mol(&self, x: f64, device_factor: f64) -> f64 {
        device_factor * self.g_red * (1.0 - self.alpha_ox * x)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("g_red", self.g_red),
            ("v_decay", self.v_decay),
            ("g_leak", self.g_leak),
            ("kappa", self.kappa),
            ("c_sat", self.c_sat),
            ("v_c", self.v_c),
            ("tau_c", self.tau_c),
            ("k_ox", self.k_ox),
            ("k_red", self.k_red),
            ("eps_read", self.eps_read),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be strictly positive, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.alpha_ox) {
            return Err(Error::OutOfRange { what: "alpha_ox", value: self.alpha_ox });
        }
        if self.c_sat > 1.0 {
            return Err(Error::OutOfRange { what: "c_sat", value: self.c_sat });
        }
        for (name, v) in [("sigma_c2c", self.sigma_c2c), ("sigma_d2d", self.sigma_d2d), ("drift_sigma", self.drift_sigma)] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.drift_tau > 0.0) {
            return Err(Error::InvalidArgument("drift_tau must be strictly positive".into()));
        }
        Ok(())
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::calibrated()
    }
}

/// Creates a pristine unit whose device factor is drawn lognormally from
/// `device_seed`. `sigma_d2d = 0` yields a factor of exactly 1.
pub fn spawn_unit(params: &ModelParams, device_seed: u64) -> UnitState {
    let device_factor = if params.sigma_d2d == 0.0 {
        1.0
    } else {
        SplitMix64::new(device_seed).next_lognormal(params.sigma_d2d)
    };
    UnitState { x: X_PRISTINE, c: 0.0, device_factor, elapsed_s: 0.0 }
}

/// Mean-reverting bounded random walk on (x, c): an Ornstein-Uhlenbeck
/// discretization anchored at the entry state, stepped at <= drift_tau / 10.
/// Deterministic per seed; zero sigma or zero duration is the identity.
pub fn retention_evolve(state: &UnitState, duration_s: f64, params: &ModelParams, seed: u64) -> Result<UnitState> {
    if duration_s < 0.0 || !duration_s.is_finite() {
        return Err(Error::InvalidArgument(format!("duration must be >= 0, got {duration_s}")));
    }
    let mut out = state.clone();
    if duration_s == 0.0 || params.drift_sigma == 0.0 {
        out.elapsed_s += duration_s;
        return Ok(out);
    }
    let h = params.drift_tau / 10.0;
    let steps = (duration_s / h).ceil().max(1.0) as u64;
    let h = duration_s / steps as f64;
    let mut rng = substream(seed, 0x7265_74656e74); // per-op stream
    let anchor_x = state.x;
    let anchor_c = state.c;
    let theta = h / params.drift_tau;
    let noise = params.drift_sigma * (2.0 * h / params.drift_tau).sqrt();
    for _ in 0..steps {
        out.x += -(out.x - anchor_x) * theta + noise * rng.next_normal();
        out.c += -(out.c - anchor_c) * theta + noise * rng.next_normal();
        out.clamp();
    }
    out.elapsed_s += duration_s;
    Ok(out)
}
