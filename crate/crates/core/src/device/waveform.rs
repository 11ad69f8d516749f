use crate::error::{Error, Result};

/// One constant-rate ramp: step toward `target_v` in increments of `step_v`,
/// dwelling `dwell_s` at each grid point (the target itself included).
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub target_v: f64,
    pub step_v: f64,
    pub dwell_s: f64,
}

/// A timed voltage schedule. Segments are voltage-continuous by construction:
/// each starts where the previous one ended (the first starts at `start_v`).
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub start_v: f64,
    pub segments: Vec<Segment>,
    pub label: String,
}

/// A single expanded waveform point.
#[derive(Debug, Clone, Copy)]
pub struct WaveformPoint {
    pub v: f64,
    pub dwell_s: f64,
    /// +1 on the positive excursion, -1 on the negative one.
    pub polarity: i8,
    /// true while |V| moves away from zero.
    pub forward: bool,
}

impl Waveform {
    pub fn new(label: impl Into<String>) -> Self {
        Waveform { start_v: 0.0, segments: Vec::new(), label: label.into() }
    }

    pub fn push(&mut self, target_v: f64, step_v: f64, dwell_s: f64) -> &mut Self {
        self.segments.push(Segment { target_v, step_v, dwell_s });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::InvalidArgument("waveform has no segments".into()));
        }
        for s in &self.segments {
            if !s.target_v.is_finite() || !s.step_v.is_finite() || !s.dwell_s.is_finite() {
                return Err(Error::InvalidArgument("non-finite waveform segment".into()));
            }
            if s.step_v <= 0.0 {
                return Err(Error::InvalidArgument(format!("ramp step must be > 0, got {}", s.step_v)));
            }
            if s.dwell_s <= 0.0 {
                return Err(Error::InvalidArgument(format!("dwell must be > 0, got {}", s.dwell_s)));
            }
        }
        Ok(())
    }

    /// Expands the schedule to its sample grid. Each segment contributes
    /// `round(|target - from| / step) + 1` points including both endpoints,
    /// so a leg boundary is visited once per leg, matching dual-sweep counts.
    pub fn expand(&self) -> Vec<WaveformPoint> {
        let mut pts = Vec::new();
        let mut from = self.start_v;
        for seg in &self.segments {
            let span = seg.target_v - from;
            let n = (span.abs() / seg.step_v).round().max(0.0) as usize;
            let forward = seg.target_v.abs() >= from.abs();
            let polarity: i8 = if seg.target_v != 0.0 {
                if seg.target_v > 0.0 { 1 } else { -1 }
            } else if from > 0.0 {
                1
            } else if from < 0.0 {
                -1
            } else {
                1
            };
            for i in 0..=n {
                let v = if n == 0 { seg.target_v } else { from + span * (i as f64) / (n as f64) };
                pts.push(WaveformPoint { v, dwell_s: seg.dwell_s, polarity, forward });
            }
            from = seg.target_v;
        }
        pts
    }

    /// Total scheduled time, seconds.
    pub fn duration(&self) -> f64 {
        self.expand().iter().map(|p| p.dwell_s).sum()
    }

    /// True if every nonzero sample voltage has the given sign.
    pub fn is_single_polarity(&self, positive: bool) -> bool {
        self.expand().iter().all(|p| {
            if p.v == 0.0 {
                true
            } else if positive {
                p.v > 0.0
            } else {
                p.v < 0.0
            }
        })
    }
}

/// A one-direction sweep `start -> stop` (and back if `return_to_start`) in
/// uniform steps of magnitude `step`.
pub fn make_sweep(start: f64, stop: f64, step: f64, dwell: f64, return_to_start: bool) -> Result<Waveform> {
    for (name, v) in [("start", start), ("stop", stop), ("step", step), ("dwell", dwell)] {
        if !v.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite {name}")));
        }
    }
    if step <= 0.0 {
        return Err(Error::InvalidArgument(format!("step must be > 0, got {step}")));
    }
    if dwell <= 0.0 {
        return Err(Error::InvalidArgument(format!("dwell must be > 0, got {dwell}")));
    }
    if start == stop {
        return Err(Error::InvalidArgument("start and stop coincide".into()));
    }
    if step > (stop - start).abs() {
        return Err(Error::InvalidArgument(format!(
            "step {step} exceeds sweep span {}",
            (stop - start).abs()
        )));
    }
    let mut wf = Waveform::new(format!("sweep {start} -> {stop} V"));
    wf.start_v = start;
    wf.push(stop, step, dwell);
    if return_to_start {
        wf.push(start, step, dwell);
    }
    wf.validate()?;
    Ok(wf)
}

/// The dual-direction schedule of the dc characterization:
/// `0 -> +stop -> 0 -> -stop -> 0`.
pub fn make_dual_sweep(stop: f64, step: f64, dwell: f64) -> Result<Waveform> {
    if !(stop > 0.0) || !stop.is_finite() {
        return Err(Error::InvalidArgument(format!("stop must be > 0, got {stop}")));
    }
    if step > stop {
        return Err(Error::InvalidArgument(format!("step {step} exceeds sweep span {stop}")));
    }
    let mut wf = Waveform::new(format!("dual sweep +-{stop} V"));
    wf.push(stop, step, dwell)
        .push(0.0, step, dwell)
        .push(-stop, step, dwell)
        .push(0.0, step, dwell);
    wf.validate()?;
    Ok(wf)
}

/// A rectangular programming pulse: jump to `level_v`, hold for `width_s`
/// (in `hold_dwell` chunks), jump back to 0.
pub fn make_pulse(level_v: f64, width_s: f64, hold_dwell: f64) -> Result<Waveform> {
    if level_v == 0.0 || !level_v.is_finite() {
        return Err(Error::InvalidArgument(format!("pulse level must be nonzero, got {level_v}")));
    }
    if !(width_s > 0.0) || !(hold_dwell > 0.0) {
        return Err(Error::InvalidArgument("pulse width and dwell must be > 0".into()));
    }
    let n = (width_s / hold_dwell).round().max(1.0);
    let mut wf = Waveform::new(format!("pulse {level_v} V x {width_s} s"));
    wf.push(level_v, level_v.abs(), width_s / n); // one step up, first dwell
    if n > 1.0 {
        // hold: zero-span segment grid is a single point, so repeat dwells
        for _ in 1..(n as usize) {
            wf.push(level_v, level_v.abs(), width_s / n);
        }
    }
    wf.push(0.0, level_v.abs(), 1e-4);
    wf.validate()?;
    Ok(wf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_sample_counts() {
        let wf = make_sweep(0.0, 3.0, 0.05, 0.02, true).unwrap();
        let pts = wf.expand();
        assert_eq!(pts.len(), 122); // 61 forward + 61 backward
        assert_eq!(pts.iter().filter(|p| p.forward).count(), 61);
        assert_eq!(pts.iter().filter(|p| !p.forward).count(), 61);
        assert!((pts[60].v - 3.0).abs() < 1e-12);
        assert!((pts[61].v - 3.0).abs() < 1e-12);
    }

    #[test]
    fn negative_sweep_mirrors() {
        let pos = make_sweep(0.0, 3.0, 0.05, 0.02, true).unwrap().expand();
        let neg = make_sweep(0.0, -3.0, 0.05, 0.02, true).unwrap().expand();
        assert_eq!(pos.len(), neg.len());
        for (p, n) in pos.iter().zip(&neg) {
            assert!((p.v + n.v).abs() < 1e-12);
            assert_eq!(p.forward, n.forward);
            assert_eq!(p.polarity, -n.polarity);
        }
    }

    #[test]
    fn fig3_family_leg_length() {
        let wf = make_sweep(0.0, 10.0, 0.1, 0.02, true).unwrap();
        assert_eq!(wf.expand().iter().filter(|p| p.forward).count(), 101);
    }

    #[test]
    fn invalid_sweeps_rejected() {
        assert!(make_sweep(0.0, 0.0, 0.1, 0.02, true).is_err());
        assert!(make_sweep(0.0, 1.0, 0.0, 0.02, true).is_err());
        assert!(make_sweep(0.0, 1.0, 2.0, 0.02, true).is_err());
        assert!(make_sweep(0.0, f64::NAN, 0.1, 0.02, true).is_err());
        assert!(make_sweep(0.0, 1.0, 0.1, 0.0, true).is_err());
    }

    #[test]
    fn dual_sweep_polarity_split() {
        let pts = make_dual_sweep(3.0, 0.05, 0.02).unwrap().expand();
        assert_eq!(pts.len(), 244);
        assert_eq!(pts.iter().filter(|p| p.polarity == 1).count(), 122);
        assert_eq!(pts.iter().filter(|p| p.polarity == -1).count(), 122);
    }

    #[test]
    fn pulse_duration() {
        // the trailing ramp-off re-dwells at the level for one short sample
        let wf = make_pulse(2.5, 0.5, 0.02).unwrap();
        let held: f64 = wf.expand().iter().filter(|p| p.v != 0.0).map(|p| p.dwell_s).sum();
        assert!((held - 0.5).abs() < 1e-3, "held {held}");
    }
}
