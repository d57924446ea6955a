use alloc::vec::Vec;

use crate::{CMatrix, Complex64, DsseError, Result};

use super::RadialNetwork;

/// Scales every branch resistance by `r_scale` and resets the reactance so each
/// impedance entry keeps its magnitude: `R' = s·R`, `X' = ±sqrt(|Z|² − R'²)`.
///
/// Mutual (off-diagonal) entries are transformed the same way.
pub fn perturb_rx_ratio(net: &RadialNetwork, r_scale: f64) -> Result<RadialNetwork> {
    if !(r_scale.is_finite() && r_scale > 0.0) {
        return Err(DsseError::InvalidInput(alloc::format!(
            "r_scale must be positive, got {r_scale}"
        )));
    }
    if r_scale == 1.0 {
        return Ok(net.clone());
    }
    let mut impedances: Vec<CMatrix> = Vec::with_capacity(net.branches().len());
    for br in net.branches() {
        let mut z = br.impedance.clone();
        for v in z.iter_mut() {
            let mag = v.norm();
            if mag == 0.0 {
                continue;
            }
            let r = v.re * r_scale;
            if r.abs() > mag {
                return Err(DsseError::RxInfeasible {
                    from: br.from.0,
                    to: br.to.0,
                    scaled_r: r,
                    magnitude: mag,
                });
            }
            let x = libm::sqrt(mag * mag - r * r);
            *v = Complex64::new(r, if v.im < 0.0 { -x } else { x });
        }
        impedances.push(z);
    }
    net.with_impedances(impedances)
}
