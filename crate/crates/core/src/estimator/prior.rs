use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use super::{MeasurementStep, StateKind};
use crate::complexstats::{assemble_complex_covariance, sd_from_error, ComplexGaussian, CorrelationMatrix};
use crate::netmodel::RadialNetwork;
use crate::{CMatrix, CVector, Complex64, DsseError, Result};

/// Error band assumed for an injection that only has a real measurement and
/// no pseudo value.
pub const FALLBACK_PSEUDO_EPSILON: f64 = 50.0;

/// Prior over the injected currents of every step in `window`, stacked
/// step-major with states inner. `cr` must span exactly `window.len()` steps.
pub fn build_prior(
    net: &RadialNetwork,
    window: &[MeasurementStep],
    cr: &CorrelationMatrix,
) -> Result<ComplexGaussian> {
    let m = net.state_len();
    let w = window.len();
    if w == 0 {
        return Err(DsseError::InvalidInput("empty measurement window".into()));
    }
    if cr.n_vars() != m {
        return Err(DsseError::Dimension {
            context: "correlation variables",
            expected: m,
            actual: cr.n_vars(),
        });
    }
    if cr.nt() != w {
        return Err(DsseError::Dimension {
            context: "correlation window",
            expected: w,
            actual: cr.nt(),
        });
    }
    let mut mean = Vec::with_capacity(m * w);
    let mut sd = Vec::with_capacity(m * w);
    for (k, step) in window.iter().enumerate() {
        let mut pseudo = BTreeMap::new();
        let mut metered = BTreeMap::new();
        for meas in &step.measurements {
            if meas.target.kind != StateKind::InjectedCurrent {
                continue;
            }
            if let Some(s) = net.state_index(meas.target.bus, meas.target.phase) {
                let slot = if meas.is_real { &mut metered } else { &mut pseudo };
                slot.insert(s, (meas.value, meas.epsilon));
            }
        }
        for s in 0..m {
            let (value, eps) = match (pseudo.get(&s), metered.get(&s)) {
                (Some(&v), _) => v,
                (None, Some(&(v, _))) => (v, FALLBACK_PSEUDO_EPSILON),
                (None, None) => {
                    let bus = net.order()[s / net.phase_count()];
                    return Err(DsseError::NotObservable(format!(
                        "no pseudo measurement for bus {bus} phase {} at window step {k}",
                        s % net.phase_count()
                    )));
                }
            };
            mean.push(value);
            sd.push(sd_from_error(value, eps));
        }
    }
    let (gamma, c) = assemble_complex_covariance(&sd, cr)?;
    Ok(ComplexGaussian::from_parts_unchecked(CVector::from_vec(mean), gamma, c))
}

/// Independent prior over the reference voltage of every phase and step,
/// stacked step-major.
pub fn reference_prior(window: &[MeasurementStep]) -> Result<ComplexGaussian> {
    let mut mean = Vec::new();
    let mut gamma = Vec::new();
    let mut c = Vec::new();
    for step in window {
        for &v in &step.vref {
            let sd = sd_from_error(v, step.vref_epsilon);
            let (sr, si) = (sd.re * sd.re, sd.im * sd.im);
            mean.push(v);
            gamma.push(Complex64::new(sr + si, 0.0));
            c.push(Complex64::new(sr - si, 0.0));
        }
    }
    ComplexGaussian::new(
        CVector::from_vec(mean),
        CMatrix::from_diagonal(&CVector::from_vec(gamma)),
        CMatrix::from_diagonal(&CVector::from_vec(c)),
    )
}

/// Injections and reference voltages as one independent pair of blocks.
pub fn latent_prior(injections: &ComplexGaussian, vref: &ComplexGaussian) -> Result<ComplexGaussian> {
    let (a, b) = (injections.dim(), vref.dim());
    let mut mean = CVector::zeros(a + b);
    mean.rows_mut(0, a).copy_from(injections.mean());
    mean.rows_mut(a, b).copy_from(vref.mean());
    let stack = |x: &CMatrix, y: &CMatrix| {
        let mut out = CMatrix::zeros(a + b, a + b);
        out.view_mut((0, 0), (a, a)).copy_from(x);
        out.view_mut((a, a), (b, b)).copy_from(y);
        out
    };
    Ok(ComplexGaussian::from_parts_unchecked(
        mean,
        stack(injections.gamma(), vref.gamma()),
        stack(injections.c(), vref.c()),
    ))
}
