//! Aggregated residuals of an identity over a sample set.
//!
//! Floats are written in scientific notation with 17 significant digits so
//! that identical inputs give byte-identical JSON. Non-finite values are
//! written as `null`.

use serde::ser::Error as _;
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

fn fixed_digits<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if !x.is_finite() {
        return s.serialize_none();
    }
    let raw = RawValue::from_string(format!("{x:.16e}")).map_err(S::Error::custom)?;
    raw.serialize(s)
}

/// Formats a float the way reports do.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub identity: String,
    pub points: usize,
    #[serde(serialize_with = "fixed_digits")]
    pub max_residual: f64,
    #[serde(serialize_with = "fixed_digits")]
    pub mean_residual: f64,
    #[serde(serialize_with = "fixed_digits")]
    pub tolerance: f64,
    pub pass: bool,
    /// Samples left out (non-regular points and the like).
    #[serde(skip_serializing_if = "is_zero")]
    pub skipped: usize,
    /// Negative control: `pass` means the residual exceeded `tolerance`.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub control: bool,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

fn summarize(residuals: &[f64]) -> (f64, f64) {
    if residuals.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let max = residuals.iter().copied().fold(f64::NEG_INFINITY, |m, r| if r.is_nan() || m.is_nan() { f64::NAN } else { m.max(r) });
    let mean = residuals.iter().sum::<f64>() / residuals.len() as f64;
    (max, mean)
}

impl ResidualReport {
    /// Passes when every residual is below `tolerance`.
    pub fn new(identity: impl Into<String>, residuals: &[f64], tolerance: f64) -> Self {
        let (max_residual, mean_residual) = summarize(residuals);
        Self {
            identity: identity.into(),
            points: residuals.len(),
            max_residual,
            mean_residual,
            tolerance,
            pass: max_residual < tolerance,
            skipped: 0,
            control: false,
        }
    }

    /// Negative control: passes when the largest residual exceeds `threshold`.
    pub fn control(identity: impl Into<String>, residuals: &[f64], threshold: f64) -> Self {
        let mut r = Self::new(identity, residuals, threshold);
        r.control = true;
        r.pass = r.max_residual > threshold;
        r
    }

    /// Re-thresholds the report, keeping its control semantics.
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self.pass = if self.control { self.max_residual > tolerance } else { self.max_residual < tolerance };
        self
    }

    pub fn with_skipped(mut self, skipped: usize) -> Self {
        self.skipped = skipped;
        self
    }

    /// Fails a report that has no samples at all.
    pub fn require_points(mut self) -> Self {
        if self.points == 0 {
            self.pass = false;
        }
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serialization is infallible")
    }

    /// One row of the plain-text table.
    pub fn table_row(&self) -> String {
        let verdict = match (self.control, self.pass) {
            (false, true) => "pass",
            (false, false) => "FAIL",
            (true, true) => "expected-fail",
            (true, false) => "CONTROL-MISSED",
        };
        format!(
            "{:<44} {:>6} {:>24} {:>24} {:>24}  {}",
            self.identity,
            self.points,
            format_float(self.max_residual),
            format_float(self.mean_residual),
            format_float(self.tolerance),
            verdict
        )
    }

    pub fn table_header() -> String {
        format!(
            "{:<44} {:>6} {:>24} {:>24} {:>24}  {}",
            "identity", "points", "max_residual", "mean_residual", "tolerance", "verdict"
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_fields_and_digits() {
        let r = ResidualReport::new("bending", &[1e-12, 3e-12], 1e-10);
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        for k in ["identity", "points", "max_residual", "mean_residual", "tolerance", "pass"] {
            assert!(v.get(k).is_some(), "{k}");
        }
        assert!(v.get("control").is_none());
        assert!(r.to_json().contains("\"max_residual\":3.0000000000000001e-12"));
        assert_eq!(v["max_residual"].as_f64().unwrap(), 3e-12);
        assert!(r.pass);
    }

    #[test]
    fn nan_is_null_and_fails() {
        let r = ResidualReport::new("x", &[1.0, f64::NAN], 10.0);
        assert!(!r.pass);
        assert!(r.to_json().contains("\"max_residual\":null"));
    }

    #[test]
    fn control_inverts_verdict() {
        assert!(ResidualReport::control("c", &[0.5, 1e-9], 1e-2).pass);
        assert!(!ResidualReport::control("c", &[1e-9], 1e-2).pass);
        let empty = ResidualReport::new("e", &[], 1.0);
        assert!(!empty.pass);
    }

    #[test]
    fn byte_identical() {
        let a = ResidualReport::new("x", &[0.1, 0.2, 0.30000000000000004], 1.0);
        let b = ResidualReport::new("x", &[0.1, 0.2, 0.30000000000000004], 1.0);
        assert_eq!(a.to_json(), b.to_json());
    }
}
