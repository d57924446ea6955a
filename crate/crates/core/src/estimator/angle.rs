use alloc::vec::Vec;

use crate::netmodel::FlowMatrices;
use crate::{CVector, Complex64, DsseError, Result};

/// Voltage angles used to turn pseudo powers into pseudo currents.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AngleReference {
    /// Bus voltages from a load-flow solve of the pseudo powers.
    #[default]
    PowerFlow,
    /// Every bus at the reference voltage of its phase.
    ReferenceBus,
}

const MAX_SWEEPS: usize = 100;
const SWEEP_TOLERANCE: f64 = 1e-10;

/// Currents `I = (S / V)*` for complex powers `S` (load draw positive), one
/// per state, with `V` chosen by `reference`.
pub fn pseudo_currents_from_power(
    fm: &FlowMatrices,
    powers: &[Complex64],
    vref: &[Complex64],
    reference: AngleReference,
) -> Result<CVector> {
    let m = fm.state_len();
    if powers.len() != m {
        return Err(DsseError::Dimension {
            context: "pseudo powers",
            expected: m,
            actual: powers.len(),
        });
    }
    let v0 = fm.expand_reference(vref)?;
    let currents = |v: &CVector| -> Result<CVector> {
        let mut out = Vec::with_capacity(m);
        for i in 0..m {
            if v[i].norm() == 0.0 {
                return Err(DsseError::ZeroMagnitude(i));
            }
            out.push((powers[i] / v[i]).conj());
        }
        Ok(CVector::from_vec(out))
    };
    let mut i = currents(&v0)?;
    if reference == AngleReference::ReferenceBus {
        return Ok(i);
    }
    let scale = v0.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for _ in 0..MAX_SWEEPS {
        let v = &v0 - &fm.dlf * &i;
        let next = currents(&v)?;
        let change = (&next - &i).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let size = next.iter().map(|z| z.norm()).fold(0.0, f64::max);
        i = next;
        if change <= SWEEP_TOLERANCE * size.max(f64::MIN_POSITIVE) {
            return Ok(i);
        }
    }
    Err(DsseError::NotConverged(alloc::format!(
        "pseudo power flow after {MAX_SWEEPS} sweeps at voltage scale {scale}"
    )))
}
