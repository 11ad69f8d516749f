//! Derivative-free calibration of the compact model against measured targets.
//!
//! The residual is the weighted sum of squared log-magnitude errors plus a
//! penalty for sign mismatches, minimized by Nelder-Mead over log-scaled
//! parameters with a deterministic initial simplex.

use crate::error::{Error, Result};

use super::model::{apply_waveform, read_conductance};
use super::waveform::make_dual_sweep;
use super::{ModelParams, UnitState};

/// What a calibration target measures. All observables are evaluated on a
/// fresh pristine unit driven by a 0 -> +stop -> 0 -> -stop -> 0 dual sweep
/// (`stop`/`step` in volts, dwell 20 ms per step).
#[derive(Debug, Clone, PartialEq)]
pub enum Observable {
    /// Conductance on the forward branch at `v` (sign selects the excursion).
    ForwardG { v: f64, stop: f64, step: f64 },
    /// Conductance on the backward branch at `v`.
    BackwardG { v: f64, stop: f64, step: f64 },
    /// Forward minus backward conductance at `v_read`.
    Window { v_read: f64, stop: f64, step: f64 },
    /// Voltage of the sign reversal on the positive backward branch.
    Crossing { stop: f64, step: f64 },
    /// Max |I * V| over the sweep.
    PeakPower { stop: f64, step: f64 },
    /// Zero-bias reading of a pristine unit.
    PristineG,
    /// Zero-bias reading (at +eps) after the positive cycle.
    EndPositiveG { stop: f64, step: f64 },
    /// Zero-bias reading (at -eps) at the start of the negative cycle.
    StartNegativeG { stop: f64, step: f64 },
    /// Zero-bias reading (at -eps) after the full dual sweep.
    EndNegativeG { stop: f64, step: f64 },
}

impl Observable {
    /// Compact textual form, colon-separated: `kind:args...`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.trim().split(':').collect();
        let f = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .ok_or_else(|| Error::InvalidArgument(format!("observable {text:?}: missing field {i}")))?
                .parse()
                .map_err(|e| Error::InvalidArgument(format!("observable {text:?}: {e}")))
        };
        match parts[0] {
            "fwd_g" => Ok(Observable::ForwardG { v: f(1)?, stop: f(2)?, step: f(3)? }),
            "bwd_g" => Ok(Observable::BackwardG { v: f(1)?, stop: f(2)?, step: f(3)? }),
            "window" => Ok(Observable::Window { v_read: f(1)?, stop: f(2)?, step: f(3)? }),
            "crossing" => Ok(Observable::Crossing { stop: f(1)?, step: f(2)? }),
            "peak_power" => Ok(Observable::PeakPower { stop: f(1)?, step: f(2)? }),
            "g_pristine" => Ok(Observable::PristineG),
            "g_end_pos" => Ok(Observable::EndPositiveG { stop: f(1)?, step: f(2)? }),
            "g_start_neg" => Ok(Observable::StartNegativeG { stop: f(1)?, step: f(2)? }),
            "g_end_neg" => Ok(Observable::EndNegativeG { stop: f(1)?, step: f(2)? }),
            other => Err(Error::InvalidArgument(format!("unknown observable kind {other:?}"))),
        }
    }

    pub fn to_text(&self) -> String {
        match self {
            Observable::ForwardG { v, stop, step } => format!("fwd_g:{v}:{stop}:{step}"),
            Observable::BackwardG { v, stop, step } => format!("bwd_g:{v}:{stop}:{step}"),
            Observable::Window { v_read, stop, step } => format!("window:{v_read}:{stop}:{step}"),
            Observable::Crossing { stop, step } => format!("crossing:{stop}:{step}"),
            Observable::PeakPower { stop, step } => format!("peak_power:{stop}:{step}"),
            Observable::PristineG => "g_pristine".into(),
            Observable::EndPositiveG { stop, step } => format!("g_end_pos:{stop}:{step}"),
            Observable::StartNegativeG { stop, step } => format!("g_start_neg:{stop}:{step}"),
            Observable::EndNegativeG { stop, step } => format!("g_end_neg:{stop}:{step}"),
        }
    }

}

/// One calibration target row.
#[derive(Debug, Clone)]
pub struct CalTarget {
    pub name: String,
    pub observable: Observable,
    pub value: f64,
    pub weight: f64,
}

impl CalTarget {
    pub fn parse_csv(text: &str) -> Result<Vec<CalTarget>> {
        let mut out = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') || (lineno == 0 && t.starts_with("name,")) {
                continue;
            }
            let cols: Vec<&str> = t.split(',').collect();
            if cols.len() != 4 {
                return Err(Error::Parse { offset: lineno, msg: format!("expected 4 columns, got {}", cols.len()) });
            }
            out.push(CalTarget {
                name: cols[0].trim().to_string(),
                observable: Observable::parse(cols[1])?,
                value: cols[2].trim().parse().map_err(|e| Error::Parse { offset: lineno, msg: format!("{e}") })?,
                weight: cols[3].trim().parse().map_err(|e| Error::Parse { offset: lineno, msg: format!("{e}") })?,
            });
        }
        Ok(out)
    }

    pub fn to_csv(targets: &[CalTarget]) -> String {
        let mut s = String::from("name,observable,value,weight\n");
        for t in targets {
            s.push_str(&format!("{},{},{:e},{}\n", t.name, t.observable.to_text(), t.value, t.weight));
        }
        s
    }
}

/// The spec anchor set used by the shipped defaults and the `calibrate` CLI.
pub fn reference_targets() -> Vec<CalTarget> {
    let t = |name: &str, obs: Observable, value: f64, weight: f64| CalTarget {
        name: name.into(),
        observable: obs,
        value,
        weight,
    };
    vec![
        t("g_fwd_0.1", Observable::ForwardG { v: 0.1, stop: 3.0, step: 0.05 }, 1.20e-9, 6.0),
        t("g_fwd_0.5", Observable::ForwardG { v: 0.5, stop: 3.0, step: 0.05 }, 0.24e-9, 6.0),
        t("g_fwd_3.0", Observable::ForwardG { v: 3.0, stop: 3.0, step: 0.05 }, 0.06e-9, 5.0),
        t("crossing", Observable::Crossing { stop: 3.0, step: 0.05 }, 2.9, 5.0),
        t("window_pos", Observable::Window { v_read: 0.5, stop: 3.0, step: 0.05 }, 0.64e-9, 5.0),
        t("window_neg", Observable::Window { v_read: -0.5, stop: 3.0, step: 0.05 }, 0.66e-9, 4.0),
        t("peak_power", Observable::PeakPower { stop: 3.0, step: 0.05 }, 690e-12, 4.0),
        t("g_pristine", Observable::PristineG, 14.5e-9, 2.0),
        t("g_end_pos", Observable::EndPositiveG { stop: 3.0, step: 0.05 }, -36.18e-9, 1.0),
        t("g_start_neg", Observable::StartNegativeG { stop: 3.0, step: 0.05 }, 22.14e-9, 1.0),
        t("g_end_neg", Observable::EndNegativeG { stop: 3.0, step: 0.05 }, -23.47e-9, 1.0),
        t("window_5.5", Observable::Window { v_read: 0.5, stop: 5.5, step: 0.1 }, 1697e-12, 0.3),
        t("window_10", Observable::Window { v_read: 0.5, stop: 10.0, step: 0.1 }, 2907e-12, 0.3),
    ]
}

/// Evaluates one observable under `params` (fresh pristine unit per sweep).
pub fn evaluate_observable(obs: &Observable, params: &ModelParams) -> Result<f64> {
    let run = |stop: f64, step: f64| -> Result<(UnitState, super::trace::IVTrace)> {
        let wf = make_dual_sweep(stop, step, 0.02)?;
        apply_waveform(&UnitState::pristine(), &wf, params, None)
    };
    match *obs {
        Observable::PristineG => Ok(read_conductance(&UnitState::pristine(), params, 0.0)),
        Observable::ForwardG { v, stop, step } => run(stop, step)?.1.g_at(v, super::trace::Branch::Fwd),
        Observable::BackwardG { v, stop, step } => run(stop, step)?.1.g_at(v, super::trace::Branch::Bwd),
        Observable::Window { v_read, stop, step } => run(stop, step)?.1.memory_window(v_read),
        Observable::Crossing { stop, step } => run(stop, step)?
            .1
            .sign_reversal_voltage()
            .ok_or_else(|| Error::InvalidArgument("no sign reversal in sweep".into())),
        Observable::PeakPower { stop, step } => Ok(run(stop, step)?.1.peak_power()?.0),
        Observable::EndPositiveG { stop, step } => {
            let (_, trace) = run(stop, step)?;
            let s = trace
                .samples
                .iter()
                .rfind(|s| s.polarity == 1 && s.branch == super::trace::Branch::Bwd)
                .ok_or_else(|| Error::InvalidArgument("missing positive back branch".into()))?;
            Ok(s.g)
        }
        Observable::StartNegativeG { stop, step } => {
            let (_, trace) = run(stop, step)?;
            let s = trace
                .samples
                .iter()
                .find(|s| s.polarity == -1)
                .ok_or_else(|| Error::InvalidArgument("missing negative branch".into()))?;
            Ok(s.g)
        }
        Observable::EndNegativeG { stop, step } => {
            let (_, trace) = run(stop, step)?;
            let s = trace
                .samples
                .last()
                .ok_or_else(|| Error::InvalidArgument("empty trace".into()))?;
            Ok(s.g)
        }
    }
}

#[derive(Debug, Clone)]
pub struct ResidualRow {
    pub name: String,
    pub simulated: f64,
    pub target: f64,
    /// log-magnitude residual, plus sign-penalty contribution if any
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct CalibrationResult {
    pub params: ModelParams,
    pub residuals: Vec<ResidualRow>,
    pub rss: f64,
    pub converged: bool,
    pub iterations: u32,
    pub evaluations: u64,
}

const SIGN_PENALTY: f64 = 30.0;

fn objective(params: &ModelParams, targets: &[CalTarget]) -> f64 {
    let mut total = 0.0;
    for t in targets {
        let sim = match evaluate_observable(&t.observable, params) {
            Ok(v) if v.is_finite() => v,
            _ => return f64::INFINITY,
        };
        let mut r = 0.0;
        if sim.signum() != t.value.signum() {
            r += SIGN_PENALTY;
        }
        let mag = (sim.abs().max(1e-18) / t.value.abs().max(1e-18)).ln();
        r += mag * mag;
        total += t.weight * r;
    }
    // keep the displaced-anion offset point in its physical band
    let kc = params.kappa * params.c_sat;
    if kc > 3.5 {
        total += 100.0 * (kc - 3.5) * (kc - 3.5);
    }
    if kc < 2.5 {
        total += 100.0 * (2.5 - kc) * (2.5 - kc);
    }
    total
}

const DIM: usize = 10;

fn to_vec(p: &ModelParams) -> [f64; DIM] {
    [
        p.g_red.ln(),
        (p.alpha_ox / (1.0 - p.alpha_ox)).ln(), // logit keeps alpha in (0, 1)
        p.v_decay.ln(),
        p.g_leak.ln(),
        p.kappa.ln(),
        (p.c_sat / (1.0 - p.c_sat)).ln(),
        p.v_c.ln(),
        p.tau_c.ln(),
        p.k_ox.ln(),
        p.k_red.ln(),
    ]
}

fn from_vec(v: &[f64; DIM], template: &ModelParams) -> ModelParams {
    let mut p = template.clone();
    p.g_red = v[0].exp();
    p.alpha_ox = 1.0 / (1.0 + (-v[1]).exp());
    p.v_decay = v[2].exp();
    p.g_leak = v[3].exp();
    p.kappa = v[4].exp();
    p.c_sat = 1.0 / (1.0 + (-v[5]).exp());
    p.v_c = v[6].exp();
    p.tau_c = v[7].exp();
    p.k_ox = v[8].exp();
    p.k_red = v[9].exp();
    p
}

/// Nelder-Mead fit of the model constants to `targets`, starting from `seed`.
/// Deterministic: the initial simplex steps each coordinate by a fixed 5%.
pub fn calibrate(targets: &[CalTarget], seed: &ModelParams, max_iterations: u32) -> Result<CalibrationResult> {
    if targets.len() < 6 {
        return Err(Error::InvalidArgument(format!(
            "need at least 6 calibration targets, got {}",
            targets.len()
        )));
    }
    seed.validate()?;
    let mut evals: u64 = 0;
    let mut f = |v: &[f64; DIM]| -> f64 {
        evals += 1;
        objective(&from_vec(v, seed), targets)
    };

    // simplex init
    let x0 = to_vec(seed);
    let mut simplex: Vec<([f64; DIM], f64)> = Vec::with_capacity(DIM + 1);
    let fx0 = f(&x0);
    simplex.push((x0, fx0));
    for i in 0..DIM {
        let mut xi = x0;
        xi[i] += 0.05;
        let fi = f(&xi);
        simplex.push((xi, fi));
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iterations {
        iterations += 1;
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let best = simplex[0].1;
        let worst = simplex[DIM].1;
        if (worst - best).abs() < 1e-10 * (1.0 + best.abs()) {
            converged = true;
            break;
        }
        // centroid of all but worst
        let mut centroid = [0.0; DIM];
        for (x, _) in &simplex[..DIM] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / DIM as f64;
            }
        }
        let xw = simplex[DIM].0;
        let mut reflect = [0.0; DIM];
        for i in 0..DIM {
            reflect[i] = centroid[i] + alpha * (centroid[i] - xw[i]);
        }
        let fr = f(&reflect);
        if fr < simplex[0].1 {
            let mut expand = [0.0; DIM];
            for i in 0..DIM {
                expand[i] = centroid[i] + gamma * (reflect[i] - centroid[i]);
            }
            let fe = f(&expand);
            simplex[DIM] = if fe < fr { (expand, fe) } else { (reflect, fr) };
        } else if fr < simplex[DIM - 1].1 {
            simplex[DIM] = (reflect, fr);
        } else {
            let mut contract = [0.0; DIM];
            for i in 0..DIM {
                contract[i] = centroid[i] + rho * (xw[i] - centroid[i]);
            }
            let fc = f(&contract);
            if fc < simplex[DIM].1 {
                simplex[DIM] = (contract, fc);
            } else {
                // shrink toward best
                let xb = simplex[0].0;
                for entry in simplex.iter_mut().skip(1) {
                    for i in 0..DIM {
                        entry.0[i] = xb[i] + sigma * (entry.0[i] - xb[i]);
                    }
                    entry.1 = f(&entry.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let params = from_vec(&simplex[0].0, seed);

    let residuals = targets
        .iter()
        .map(|t| {
            let sim = evaluate_observable(&t.observable, &params).unwrap_or(f64::NAN);
            let mut r = (sim.abs().max(1e-18) / t.value.abs().max(1e-18)).ln();
            if sim.signum() != t.value.signum() {
                r += SIGN_PENALTY.sqrt();
            }
            ResidualRow { name: t.name.clone(), simulated: sim, target: t.value, residual: r }
        })
        .collect();

    Ok(CalibrationResult { rss: simplex[0].1, params, residuals, converged, iterations, evaluations: evals })
}
