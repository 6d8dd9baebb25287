//! Flat `key=value` parameter files.
//!
//! Recognised keys are `loss_db_per_km`, `xi`, `d0`, `d1`, `e_align` and
//! `f_ec`. Blank lines are ignored and `#` starts a comment. Keys missing from
//! a file keep their gys-like default; unknown keys are rejected.

use std::fmt::Write as _;
use std::path::Path;

use crate::detection::{ChannelParams, DetectorParams};
use crate::error::{check_range, Error, Result};

/// Shipped defaults. These are typical fibre-link numbers, not values taken
/// from any particular experiment.
pub const GYS_LIKE_CONFIG: &str = "\
# gys-like defaults
loss_db_per_km = 0.21
xi = 0.045
d0 = 8.5e-7
d1 = 8.5e-7
e_align = 0.033
f_ec = 1.22
";

const KEYS: [&str; 6] = ["loss_db_per_km", "xi", "d0", "d1", "e_align", "f_ec"];

/// Everything the rate and simulation code needs besides μ and distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub detector: DetectorParams,
    pub loss_db_per_km: f64,
    /// Error-correction inefficiency `f(e)`.
    pub f_ec: f64,
    /// Statistical slack added to the phase-error bound.
    pub epsilon: f64,
    /// `|β|²/|α|²` used for bright-reference sources.
    pub ref_ratio: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::gys_like()
    }
}

impl SystemParams {
    pub fn gys_like() -> Self {
        Self::parse(GYS_LIKE_CONFIG).expect("embedded defaults parse")
    }

    pub fn channel(&self, distance_km: f64) -> ChannelParams {
        ChannelParams {
            loss_db_per_km: self.loss_db_per_km,
            distance_km,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.detector.validate()?;
        check_range(
            "loss_db_per_km",
            self.loss_db_per_km,
            0.0,
            f64::MAX,
            "[0, inf)",
        )?;
        check_range("f_ec", self.f_ec, 1.0, f64::MAX, "[1, inf)")?;
        check_range("epsilon", self.epsilon, 0.0, 0.5, "[0, 0.5]")?;
        check_range("ref_ratio", self.ref_ratio, 1.0, f64::MAX, "[1, inf)")?;
        Ok(())
    }

    /// Parses a parameter file, starting from the gys-like defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Self {
            detector: DetectorParams {
                d0: 8.5e-7,
                d1: 8.5e-7,
                xi: 0.045,
                e_align: 0.033,
            },
            loss_db_per_km: 0.21,
            f_ec: 1.22,
            epsilon: 0.0,
            ref_ratio: 100.0,
        };
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Config { line: line_no, msg };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got {line:?}")))?;
            let key = key.trim();
            let value: f64 = value.trim().parse().map_err(|_| {
                err(format!(
                    "{key}: cannot parse {:?} as a number",
                    value.trim()
                ))
            })?;
            match key {
                "loss_db_per_km" => p.loss_db_per_km = value,
                "xi" => p.detector.xi = value,
                "d0" => p.detector.d0 = value,
                "d1" => p.detector.d1 = value,
                "e_align" => p.detector.e_align = value,
                "f_ec" => p.f_ec = value,
                _ => {
                    return Err(err(format!(
                        "unknown key {key:?}; expected one of {KEYS:?}"
                    )))
                }
            }
        }
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            line: 0,
            msg: format!("{}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    /// Serializes the file-backed fields; `parse(to_config_string())` round-trips.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let d = &self.detector;
        for (k, v) in [
            ("loss_db_per_km", self.loss_db_per_km),
            ("xi", d.xi),
            ("d0", d.d0),
            ("d1", d.d1),
            ("e_align", d.e_align),
            ("f_ec", self.f_ec),
        ] {
            writeln!(s, "{k} = {v:e}").expect("writing to a String");
        }
        s
    }
}
