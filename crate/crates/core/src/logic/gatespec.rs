//! Configurable one/two-step Boolean gate framework.
//!
//! A spec names the required starting state, a schedule of per-step terminal
//! voltages (keyed by the input bits), and how the final conductance decodes.
//! The shipped defaults are reference constructions built from conditional
//! set/clear programming pulses; the exact measured gate tables are loadable
//! through the same text format once available.

use std::path::Path;

use crate::codec::LevelCodec;
use crate::device::{apply_waveform, make_pulse, read_conductance, ModelParams, UnitState, Waveform, V_READ};
use crate::error::{Error, Result};

use super::GateOutcome;

/// Starting state the gate requires.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitState {
    /// The pristine / logic-0 state.
    Zero,
    /// A high stored level (set).
    One,
    /// The q input pre-loaded as the stored state.
    InputQ,
}

/// One schedule step: the voltage each terminal applies for each input bit.
/// The unit sees the difference `v_p[p] - v_q[q]` as its programming drive.
#[derive(Debug, Clone, PartialEq)]
pub struct GateStep {
    pub v_p: [f64; 2],
    pub v_q: [f64; 2],
    pub hold_s: f64,
}

/// Output decode rule on the final signed read conductance.
#[derive(Debug, Clone, PartialEq)]
pub enum Decode {
    /// 1 when the reading shows a high stored level (negative sign with
    /// magnitude at or above the threshold).
    HighBuildIn { g_mid: f64 },
    /// 1 when |G| is at or above the threshold regardless of sign.
    AbsAtLeast { g_min: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateSpec {
    pub name: String,
    pub radix: u8,
    pub init: InitState,
    pub steps: Vec<GateStep>,
    pub decode: Decode,
}

/// Drive used by the conditional-set reference pulses, volts.
pub const SET_DRIVE_V: f64 = 2.2;
/// Drive used by the conditional-clear reference pulses, volts.
pub const CLEAR_DRIVE_V: f64 = -0.9;
/// Hold width of the reference pulses, seconds.
pub const STEP_HOLD_S: f64 = 0.6;
/// Level decode midpoint of the reference constructions, siemens.
pub const G_MID_DEFAULT: f64 = 3.0e-9;

impl GateSpec {
    pub fn validate(&self) -> Result<()> {
        if self.radix != 2 {
            return Err(Error::InvalidArgument("gate specs are binary (radix 2)".into()));
        }
        if self.steps.is_empty() || self.steps.len() > 2 {
            return Err(Error::InvalidArgument(format!("schedule must have 1 or 2 steps, got {}", self.steps.len())));
        }
        for s in &self.steps {
            if !(s.hold_s > 0.0) {
                return Err(Error::InvalidArgument("step hold must be > 0".into()));
            }
        }
        match self.decode {
            Decode::HighBuildIn { g_mid } if g_mid > 0.0 => Ok(()),
            Decode::AbsAtLeast { g_min } if g_min > 0.0 => Ok(()),
            _ => Err(Error::InvalidArgument("decode threshold must be > 0".into())),
        }
    }

    fn decode_output(&self, g: f64) -> u8 {
        match self.decode {
            Decode::HighBuildIn { g_mid } => (g < 0.0 && g.abs() >= g_mid) as u8,
            Decode::AbsAtLeast { g_min } => (g.abs() >= g_min) as u8,
        }
    }

    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("name = {}\n", self.name));
        s.push_str(&format!("radix = {}\n", self.radix));
        s.push_str(&format!(
            "init = {}\n",
            match self.init {
                InitState::Zero => "zero",
                InitState::One => "one",
                InitState::InputQ => "input_q",
            }
        ));
        for (i, st) in self.steps.iter().enumerate() {
            let n = i + 1;
            s.push_str(&format!("step{n}.p = {:e},{:e}\n", st.v_p[0], st.v_p[1]));
            s.push_str(&format!("step{n}.q = {:e},{:e}\n", st.v_q[0], st.v_q[1]));
            s.push_str(&format!("step{n}.hold = {:e}\n", st.hold_s));
        }
        match self.decode {
            Decode::HighBuildIn { g_mid } => s.push_str(&format!("decode = high_buildin:{g_mid:e}\n")),
            Decode::AbsAtLeast { g_min } => s.push_str(&format!("decode = abs_at_least:{g_min:e}\n")),
        }
        s
    }

    pub fn from_key_value(text: &str) -> Result<Self> {
        let mut name = String::new();
        let mut radix = 2u8;
        let mut init = InitState::Zero;
        let mut steps: Vec<GateStep> = Vec::new();
        let mut decode = Decode::HighBuildIn { g_mid: G_MID_DEFAULT };
        let parse_pair = |v: &str, offset: usize| -> Result<[f64; 2]> {
            let parts: Vec<&str> = v.split(',').collect();
            if parts.len() != 2 {
                return Err(Error::Parse { offset, msg: format!("expected two comma-separated voltages, got {v:?}") });
            }
            Ok([
                parts[0].trim().parse().map_err(|e| Error::Parse { offset, msg: format!("{e}") })?,
                parts[1].trim().parse().map_err(|e| Error::Parse { offset, msg: format!("{e}") })?,
            ])
        };
        let ensure_step = |steps: &mut Vec<GateStep>, n: usize| {
            while steps.len() < n {
                steps.push(GateStep { v_p: [0.0; 2], v_q: [0.0; 2], hold_s: STEP_HOLD_S });
            }
        };
        let mut offset = 0usize;
        for line in text.lines() {
            let t = line.trim();
            if !t.is_empty() && !t.starts_with('#') {
                let (k, v) = t
                    .split_once('=')
                    .ok_or(Error::Parse { offset, msg: format!("expected key = value, got {t:?}") })?;
                let (k, v) = (k.trim(), v.trim());
                match k {
                    "name" => name = v.to_string(),
                    "radix" => radix = v.parse().map_err(|e| Error::Parse { offset, msg: format!("{e}") })?,
                    "init" => {
                        init = match v {
                            "zero" => InitState::Zero,
                            "one" => InitState::One,
                            "input_q" => InitState::InputQ,
                            other => return Err(Error::Parse { offset, msg: format!("unknown init {other:?}") }),
                        }
                    }
                    "decode" => {
                        let (kind, thr) = v
                            .split_once(':')
                            .ok_or(Error::Parse { offset, msg: "decode needs kind:threshold".into() })?;
                        let thr: f64 = thr.parse().map_err(|e| Error::Parse { offset, msg: format!("{e}") })?;
                        decode = match kind {
                            "high_buildin" => Decode::HighBuildIn { g_mid: thr },
                            "abs_at_least" => Decode::AbsAtLeast { g_min: thr },
                            other => return Err(Error::Parse { offset, msg: format!("unknown decode {other:?}") }),
                        };
                    }
                    _ if k.starts_with("step") => {
                        let rest = &k[4..];
                        let (num, field) = rest
                            .split_once('.')
                            .ok_or(Error::Parse { offset, msg: format!("bad step key {k:?}") })?;
                        let n: usize = num.parse().map_err(|e| Error::Parse { offset, msg: format!("{e}") })?;
                        if n == 0 || n > 2 {
                            return Err(Error::Parse { offset, msg: format!("step index {n} out of range") });
                        }
                        ensure_step(&mut steps, n);
                        match field {
                            "p" => steps[n - 1].v_p = parse_pair(v, offset)?,
                            "q" => steps[n - 1].v_q = parse_pair(v, offset)?,
                            "hold" => {
                                steps[n - 1].hold_s =
                                    v.parse().map_err(|e| Error::Parse { offset, msg: format!("{e}") })?
                            }
                            other => return Err(Error::Parse { offset, msg: format!("unknown step field {other:?}") }),
                        }
                    }
                    other => return Err(Error::Parse { offset, msg: format!("unknown gate key {other:?}") }),
                }
            }
            offset += line.len() + 1;
        }
        let spec = GateSpec { name, radix, init, steps, decode };
        spec.validate()?;
        Ok(spec)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::util::write_atomic(path, self.to_key_value().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_key_value(&std::fs::read_to_string(path)?)
    }
}

fn set_pulse(params: &ModelParams) -> Result<Waveform> {
    let _ = params;
    make_pulse(SET_DRIVE_V, STEP_HOLD_S, 0.02)
}

/// Executes the 1-2 step schedule and decodes the final conductance.
pub fn boolean_gate(
    spec: &GateSpec,
    unit: &UnitState,
    p: bool,
    q: bool,
    _codec: &LevelCodec,
    params: &ModelParams,
) -> Result<GateOutcome> {
    spec.validate()?;
    let mut waveforms = Vec::new();
    let mut state = unit.clone();
    // establish the required starting state
    let want_set = match spec.init {
        InitState::Zero => false,
        InitState::One => true,
        InitState::InputQ => q,
    };
    if want_set {
        let wf = set_pulse(params)?;
        state = apply_waveform(&state, &wf, params, None)?.0;
        waveforms.push(wf);
    }
    for step in &spec.steps {
        let drive = step.v_p[p as usize] - step.v_q[q as usize];
        if drive != 0.0 {
            let wf = make_pulse(drive, step.hold_s, 0.02)?;
            state = apply_waveform(&state, &wf, params, None)?.0;
            waveforms.push(wf);
        }
    }
    let g_final = read_conductance(&state, params, V_READ);
    let output = spec.decode_output(g_final);
    Ok(GateOutcome { output, g_final, waveforms, state })
}

/// The shipped reference constructions.
pub fn default_gate_specs() -> Vec<GateSpec> {
    // drive seen by the unit is v_p[p] - v_q[q]
    let set_if_p = GateStep { v_p: [0.0, SET_DRIVE_V], v_q: [0.0, 0.0], hold_s: STEP_HOLD_S };
    let set_if_q = GateStep { v_p: [0.0, 0.0], v_q: [0.0, -SET_DRIVE_V], hold_s: STEP_HOLD_S };
    let set_if_not_q = GateStep { v_p: [0.0, 0.0], v_q: [-SET_DRIVE_V, 0.0], hold_s: STEP_HOLD_S };
    let set_if_not_p = GateStep { v_p: [SET_DRIVE_V, 0.0], v_q: [0.0, 0.0], hold_s: STEP_HOLD_S };
    let clear_if_p = GateStep { v_p: [0.0, CLEAR_DRIVE_V], v_q: [0.0, 0.0], hold_s: STEP_HOLD_S };
    let clear_if_q = GateStep { v_p: [0.0, 0.0], v_q: [0.0, -CLEAR_DRIVE_V], hold_s: STEP_HOLD_S };
    let clear_if_not_q = GateStep { v_p: [0.0, 0.0], v_q: [-CLEAR_DRIVE_V, 0.0], hold_s: STEP_HOLD_S };
    let mid = Decode::HighBuildIn { g_mid: G_MID_DEFAULT };

    vec![
        GateSpec {
            name: "and".into(),
            radix: 2,
            init: InitState::Zero,
            steps: vec![set_if_p.clone(), clear_if_not_q.clone()],
            decode: mid.clone(),
        },
        GateSpec {
            name: "or".into(),
            radix: 2,
            init: InitState::Zero,
            steps: vec![set_if_p.clone(), set_if_q.clone()],
            decode: mid.clone(),
        },
        GateSpec {
            name: "not".into(),
            radix: 2,
            init: InitState::One,
            steps: vec![clear_if_p.clone()],
            decode: mid.clone(),
        },
        GateSpec {
            name: "nand".into(),
            radix: 2,
            init: InitState::One,
            steps: vec![clear_if_p.clone(), set_if_not_q.clone()],
            decode: mid.clone(),
        },
        GateSpec {
            name: "nor".into(),
            radix: 2,
            init: InitState::One,
            steps: vec![clear_if_p.clone(), clear_if_q.clone()],
            decode: mid.clone(),
        },
        GateSpec {
            name: "imp".into(),
            radix: 2,
            init: InitState::InputQ,
            steps: vec![set_if_not_p.clone()],
            decode: mid.clone(),
        },
        GateSpec {
            name: "xor".into(),
            radix: 2,
            init: InitState::Zero,
            steps: vec![GateStep {
                v_p: [0.0, super::XOR_TERMINAL_V],
                v_q: [0.0, super::XOR_TERMINAL_V],
                hold_s: super::XOR_PULSE_S,
            }],
            decode: Decode::AbsAtLeast { g_min: super::G_THRESH_DEFAULT },
        },
    ]
}

pub fn gate_spec_by_name(name: &str) -> Option<GateSpec> {
    default_gate_specs().into_iter().find(|g| g.name == name)
}
