//! Voltage error indices against a known truth.

use dsse_core::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    /// Mean of `100·||V̂| − |V|| / |V|`.
    pub amve_pct: f64,
    /// Mean absolute angle error in degrees.
    pub aave_deg: f64,
    pub mmve_pct: f64,
    pub mave_deg: f64,
}

/// Angle of `a` relative to `b` in degrees, wrapped to (−180, 180].
fn angle_difference_deg(a: Complex64, b: Complex64) -> f64 {
    let d = (a * b.conj()).arg().to_degrees();
    if d <= -180.0 {
        d + 360.0
    } else {
        d
    }
}

pub fn error_metrics(estimated: &[Complex64], truth: &[Complex64]) -> Result<ErrorMetrics> {
    if estimated.len() != truth.len() {
        return Err(HarnessError::Input(format!(
            "{} estimated voltages for {} true voltages",
            estimated.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(HarnessError::Input("no voltages to compare".into()));
    }
    let mut m = ErrorMetrics::default();
    for (k, (&e, &t)) in estimated.iter().zip(truth).enumerate() {
        let mag = t.norm();
        if mag == 0.0 {
            return Err(HarnessError::Input(format!("true voltage of state {k} is zero")));
        }
        let mag_err = 100.0 * (e.norm() - mag).abs() / mag;
        let ang_err = angle_difference_deg(e, t).abs();
        m.amve_pct += mag_err;
        m.aave_deg += ang_err;
        m.mmve_pct = m.mmve_pct.max(mag_err);
        m.mave_deg = m.mave_deg.max(ang_err);
    }
    let n = truth.len() as f64;
    m.amve_pct /= n;
    m.aave_deg /= n;
    Ok(m)
}
