use std::io::Write;

use crate::error::{Error, Result};

use super::MOLECULES_PER_UNIT;

/// Which way |V| was moving when the sample was taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Fwd,
    Bwd,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Fwd => "fwd",
            Branch::Bwd => "bwd",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TraceSample {
    pub time_s: f64,
    pub v_applied: f64,
    pub i: f64,
    pub g: f64,
    pub branch: Branch,
    /// Sign of the excursion this sample belongs to.
    pub polarity: i8,
}

/// Sampled (V, I, G) trajectory of one waveform application.
#[derive(Debug, Clone, Default)]
pub struct IVTrace {
    pub samples: Vec<TraceSample>,
}

impl IVTrace {
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Forward/backward conductance difference at `v_read`, linearly
    /// interpolated between the nearest samples of the matching excursion.
    pub fn memory_window(&self, v_read: f64) -> Result<f64> {
        let g_f = self.g_at(v_read, Branch::Fwd)?;
        let g_b = self.g_at(v_read, Branch::Bwd)?;
        Ok(g_f - g_b)
    }

    /// Conductance on one branch at `v_read`, interpolating in V.
    pub fn g_at(&self, v_read: f64, branch: Branch) -> Result<f64> {
        let pol: i8 = if v_read >= 0.0 { 1 } else { -1 };
        let leg: Vec<&TraceSample> = self
            .samples
            .iter()
            .filter(|s| s.branch == branch && s.polarity == pol)
            .collect();
        // exact grid hit first
        if let Some(s) = leg.iter().find(|s| (s.v_applied - v_read).abs() < 1e-12) {
            return Ok(s.g);
        }
        for w in leg.windows(2) {
            let (a, b) = (w[0], w[1]);
            if (a.v_applied - v_read) * (b.v_applied - v_read) <= 0.0 && a.v_applied != b.v_applied {
                let t = (v_read - a.v_applied) / (b.v_applied - a.v_applied);
                return Ok(a.g + t * (b.g - a.g));
            }
        }
        Err(Error::TraceRange(v_read))
    }

    /// Max over samples of |I * V_applied|, plus the per-molecule figure.
    pub fn peak_power(&self) -> Result<(f64, f64)> {
        if self.samples.is_empty() {
            return Err(Error::InvalidArgument("empty trace".into()));
        }
        let peak = self
            .samples
            .iter()
            .map(|s| (s.i * s.v_applied).abs())
            .fold(0.0_f64, f64::max);
        Ok((peak, peak / MOLECULES_PER_UNIT))
    }

    /// Voltage where the reported conductance flips sign on the backward leg
    /// of the positive excursion, if any (linear interpolation of the zero).
    pub fn sign_reversal_voltage(&self) -> Option<f64> {
        let leg: Vec<&TraceSample> = self
            .samples
            .iter()
            .filter(|s| s.branch == Branch::Bwd && s.polarity == 1)
            .collect();
        for w in leg.windows(2) {
            let (a, b) = (w[0], w[1]);
            if a.g > 0.0 && b.g < 0.0 {
                return Some(a.v_applied + (b.v_applied - a.v_applied) * a.g / (a.g - b.g));
            }
        }
        None
    }

    /// CSV export: `time_s,voltage_V,current_A,conductance_S,branch`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "time_s,voltage_V,current_A,conductance_S,branch")?;
        for s in &self.samples {
            writeln!(
                w,
                "{:.9e},{:.9e},{:.9e},{:.9e},{}",
                s.time_s,
                s.v_applied,
                s.i,
                s.g,
                s.branch.as_str()
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(v: f64, g: f64, branch: Branch) -> TraceSample {
        TraceSample { time_s: 0.0, v_applied: v, i: g * v, g, branch, polarity: if v >= 0.0 { 1 } else { -1 } }
    }

    #[test]
    fn window_interpolates() {
        let t = IVTrace {
            samples: vec![
                sample(0.4, 2.0e-10, Branch::Fwd),
                sample(0.6, 3.0e-10, Branch::Fwd),
                sample(0.6, -1.0e-10, Branch::Bwd),
                sample(0.4, -2.0e-10, Branch::Bwd),
            ],
        };
        let w = t.memory_window(0.5).unwrap();
        assert!((w - (2.5e-10 - (-1.5e-10))).abs() < 1e-18);
    }

    #[test]
    fn window_out_of_range() {
        let t = IVTrace { samples: vec![sample(0.4, 1e-10, Branch::Fwd)] };
        assert!(matches!(t.memory_window(2.0), Err(Error::TraceRange(_))));
    }

    #[test]
    fn peak_power_empty_rejected() {
        assert!(IVTrace::default().peak_power().is_err());
    }

    #[test]
    fn csv_roundtrip_precision() {
        let t = IVTrace { samples: vec![sample(0.123456789012, 1.23456789e-10, Branch::Fwd)] };
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let line = text.lines().nth(1).unwrap();
        let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((v - 0.123456789012).abs() < 1e-9);
        assert!(line.ends_with("fwd"));
    }
}
