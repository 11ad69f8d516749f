//! key=value text serialization of `ModelParams`, round-trip exact at
//! 17 significant digits.

use std::path::Path;

use crate::error::{Error, Result};

use super::ModelParams;

impl ModelParams {
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: f64| s.push_str(&format!("{k} = {v:.16e}\n"));
        put("g_red", self.g_red);
        put("alpha_ox", self.alpha_ox);
        put("v_decay", self.v_decay);
        put("g_leak", self.g_leak);
        put("kappa", self.kappa);
        put("c_sat", self.c_sat);
        put("v_c", self.v_c);
        put("tau_c", self.tau_c);
        put("k_ox", self.k_ox);
        put("k_red", self.k_red);
        put("sigma_c2c", self.sigma_c2c);
        put("sigma_d2d", self.sigma_d2d);
        put("drift_sigma", self.drift_sigma);
        put("drift_tau", self.drift_tau);
        put("eps_read", self.eps_read);
        s
    }

    pub fn from_key_value(text: &str) -> Result<Self> {
        let mut p = ModelParams::calibrated();
        let mut offset = 0usize;
        for line in text.lines() {
            let trimmed = line.trim();
            if !trimmed.is_empty() && !trimmed.starts_with('#') {
                let (key, value) = trimmed.split_once('=').ok_or(Error::Parse {
                    offset,
                    msg: format!("expected key = value, got {trimmed:?}"),
                })?;
                let v: f64 = value.trim().parse().map_err(|e| Error::Parse {
                    offset,
                    msg: format!("bad number {}: {e}", value.trim()),
                })?;
                match key.trim() {
                    "g_red" => p.g_red = v,
                    "alpha_ox" => p.alpha_ox = v,
                    "v_decay" => p.v_decay = v,
                    "g_leak" => p.g_leak = v,
                    "kappa" => p.kappa = v,
                    "c_sat" => p.c_sat = v,
                    "v_c" => p.v_c = v,
                    "tau_c" => p.tau_c = v,
                    "k_ox" => p.k_ox = v,
                    "k_red" => p.k_red = v,
                    "sigma_c2c" => p.sigma_c2c = v,
                    "sigma_d2d" => p.sigma_d2d = v,
                    "drift_sigma" => p.drift_sigma = v,
                    "drift_tau" => p.drift_tau = v,
                    "eps_read" => p.eps_read = v,
                    other => {
                        return Err(Error::Parse { offset, msg: format!("unknown parameter {other:?}") })
                    }
                }
            }
            offset += line.len() + 1;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::util::write_atomic(path, self.to_key_value().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_key_value(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_exact() {
        let p = ModelParams::calibrated();
        let q = ModelParams::from_key_value(&p.to_key_value()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn comments_and_blanks_ignored() {
        let text = format!("# comment\n\n{}", ModelParams::seed().to_key_value());
        assert!(ModelParams::from_key_value(&text).is_ok());
    }

    #[test]
    fn unknown_key_rejected_with_offset() {
        let err = ModelParams::from_key_value("bogus = 1.0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { offset: 0, .. }));
    }
}
