//! Iterative weighted least squares baseline.
//!
//! States are the polar voltages `(|V|, θ)` of every bus including the
//! reference, with `|V|` in per unit of the network base voltage. Measurement
//! functions are the rectangular parts of linear maps of the complex voltage
//! vector: load draw `−(Y V)_k`, branch current `Z⁻¹(V_up − V_down)`, bus
//! voltage `V_k`. Weights come from the same error bands as the estimator;
//! pseudo injections can be correlated through the lag-0 correlation matrix.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::complexstats::{sd_from_error, CorrelationMatrix};
use crate::estimator::{quality_from_trace, MeasurementStep, StateKind};
use crate::linalg::SymmetricFactor;
use crate::netmodel::{admittance_matrix, RadialNetwork};
use crate::{CMatrix, CVector, Complex64, DsseError, Result};

pub const WLS_TOLERANCE: f64 = 1e-6;
pub const WLS_MAX_ITERATIONS: usize = 50;

/// Standard deviations below this fraction of the largest one are raised to
/// it, so zero-valued pseudo loads keep a finite weight.
const SD_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct WlsOptions {
    /// Convergence threshold on the largest state update.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Spatial correlation of the pseudo injections; `None` gives diagonal weights.
    pub correlation: Option<CorrelationMatrix>,
}

impl Default for WlsOptions {
    fn default() -> Self {
        Self {
            tolerance: WLS_TOLERANCE,
            max_iterations: WLS_MAX_ITERATIONS,
            correlation: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WlsResult {
    /// Voltages of the non-reference states in state order, volts.
    pub voltages: CVector,
    /// Estimated reference-bus voltage per phase, volts.
    pub reference_voltage: Vec<Complex64>,
    /// Magnitudes (per unit) and angles (radians) of the non-reference states.
    pub magnitudes: Vec<f64>,
    pub angles: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Largest absolute state update of the last iteration.
    pub residual_norm: f64,
    /// Weighted sum of squared residuals at the returned state.
    pub objective: f64,
    /// Covariance of `[Re V; Im V]` of the non-reference states, per unit squared.
    pub voltage_covariance: DMatrix<f64>,
    pub quality: f64,
}

/// Offline part of the estimator: measurement operators do not depend on the data.
#[derive(Clone, Debug)]
pub struct WlsEstimator {
    net: RadialNetwork,
    y: CMatrix,
    options: WlsOptions,
    spatial: Option<CorrelationMatrix>,
}

struct Model {
    /// Complex measurement rows over all bus voltages (reference first), volts.
    rows: CMatrix,
    values: Vec<Complex64>,
    /// Whitening factor of the composite measurement covariance.
    factor: SymmetricFactor,
}

impl WlsEstimator {
    pub fn new(net: &RadialNetwork, options: WlsOptions) -> Result<Self> {
        let spatial = match &options.correlation {
            Some(cr) => {
                if cr.n_vars() != net.state_len() {
                    return Err(DsseError::Dimension {
                        context: "correlation variables",
                        expected: net.state_len(),
                        actual: cr.n_vars(),
                    });
                }
                Some(cr.spatial()?)
            }
            None => None,
        };
        Ok(Self {
            net: net.clone(),
            y: admittance_matrix(net)?,
            options,
            spatial,
        })
    }

    pub fn network(&self) -> &RadialNetwork {
        &self.net
    }

    pub fn options(&self) -> &WlsOptions {
        &self.options
    }

    fn model(&self, step: &MeasurementStep) -> Result<Model> {
        let net = &self.net;
        step.validate(net, 0)?;
        let p = net.phase_count();
        let m = net.state_len();
        let n = m + p;
        let col = |s: usize| p + s;

        let mut rows: Vec<CVector> = Vec::new();
        let mut values = Vec::new();
        let mut sd = Vec::new();
        let mut pseudo_state: Vec<Option<usize>> = Vec::new();
        let mut covered = BTreeSet::new();

        let injection_row = |s: usize| -> CVector {
            CVector::from_fn(n, |j, _| -self.y[(col(s), j)])
        };
        for meas in &step.measurements {
            let t = meas.target;
            let row = match (net.state_index(t.bus, t.phase), t.kind) {
                (None, _) => {
                    let mut r = CVector::zeros(n);
                    r[t.phase] = Complex64::new(1.0, 0.0);
                    r
                }
                (Some(s), StateKind::InjectedCurrent) => {
                    covered.insert(s);
                    injection_row(s)
                }
                (Some(s), StateKind::BranchCurrent) => {
                    let pos = s / p;
                    let br = &net.branches()[pos];
                    let yb = br.impedance.clone().lu().try_inverse().ok_or_else(|| {
                        DsseError::Structure(format!("branch {}->{} impedance is singular", br.from, br.to))
                    })?;
                    let up = match net.parent(pos) {
                        Some(u) => u * p + p,
                        None => 0,
                    };
                    let down = pos * p + p;
                    let ph = s % p;
                    let mut r = CVector::zeros(n);
                    for j in 0..p {
                        r[up + j] += yb[(ph, j)];
                        r[down + j] -= yb[(ph, j)];
                    }
                    r
                }
                (Some(s), StateKind::BusVoltage) => {
                    let mut r = CVector::zeros(n);
                    r[col(s)] = Complex64::new(1.0, 0.0);
                    r
                }
            };
            pseudo_state.push(if meas.is_real {
                None
            } else {
                net.state_index(t.bus, t.phase)
            });
            rows.push(row);
            values.push(meas.value);
            sd.push(sd_from_error(meas.value, meas.epsilon));
        }
        if let Some(s) = (0..m).find(|s| !covered.contains(s)) {
            return Err(DsseError::NotObservable(format!(
                "no injection measurement at bus {} phase {}",
                net.order()[s / p],
                s % p
            )));
        }
        for ph in 0..p {
            let mut r = CVector::zeros(n);
            r[ph] = Complex64::new(1.0, 0.0);
            rows.push(r);
            values.push(step.vref[ph]);
            sd.push(sd_from_error(step.vref[ph], step.vref_epsilon));
            pseudo_state.push(None);
        }

        let r = rows.len();
        let sr: Vec<f64> = sd.iter().map(|z| z.re.abs()).collect();
        let si: Vec<f64> = sd.iter().map(|z| z.im.abs()).collect();
        let floor = SD_FLOOR * sr.iter().chain(&si).fold(0.0_f64, |a, &b| a.max(b));
        let mut cov = DMatrix::<f64>::zeros(2 * r, 2 * r);
        for i in 0..r {
            cov[(i, i)] = sr[i] * sr[i];
            cov[(r + i, r + i)] = si[i] * si[i];
        }
        if let Some(cr) = &self.spatial {
            let cm = cr.matrix();
            for i in 0..r {
                let Some(a) = pseudo_state[i] else { continue };
                for j in 0..r {
                    let Some(b) = pseudo_state[j] else { continue };
                    cov[(i, j)] = sr[i] * sr[j] * cm[(a, b)];
                    cov[(i, r + j)] = sr[i] * si[j] * cm[(a, m + b)];
                    cov[(r + i, j)] = si[i] * sr[j] * cm[(m + a, b)];
                    cov[(r + i, r + j)] = si[i] * si[j] * cm[(m + a, m + b)];
                }
            }
        }
        for i in 0..2 * r {
            cov[(i, i)] += floor * floor;
        }
        let factor = SymmetricFactor::new(&cov, 0.0)
            .map_err(|_| DsseError::NotObservable("measurement covariance is singular".into()))?;
        let rows = CMatrix::from_fn(r, n, |i, j| rows[i][j]);
        Ok(Model {
            rows,
            values,
            factor,
        })
    }

    /// Gauss-Newton from a flat start at the reference voltage.
    pub fn estimate(&self, step: &MeasurementStep) -> Result<WlsResult> {
        let model = self.model(step)?;
        let net = &self.net;
        let p = net.phase_count();
        let m = net.state_len();
        let n = m + p;
        let r = model.values.len();
        let base = net.base_voltage();

        // Whitened real operator: W · [[Re M, −Im M], [Im M, Re M]] over [Re V; Im V].
        let real_op = DMatrix::from_fn(2 * r, 2 * n, |i, j| {
            let z = model.rows[(i % r, j % n)];
            match (i < r, j < n) {
                (true, true) => z.re,
                (true, false) => -z.im,
                (false, true) => z.im,
                (false, false) => z.re,
            }
        });
        let w_op = model.factor.solve_lower(&real_op);
        let z = DMatrix::from_fn(2 * r, 1, |i, _| {
            let v = model.values[i % r];
            if i < r {
                v.re
            } else {
                v.im
            }
        });
        let w_z = model.factor.solve_lower(&z);

        let mut mag: Vec<f64> = (0..n).map(|k| step.vref[k % p].norm() / base).collect();
        let mut ang: Vec<f64> = (0..n).map(|k| step.vref[k % p].arg()).collect();
        let mut iterations = 0;
        let mut converged = false;
        let mut step_norm = f64::INFINITY;
        let mut gain_factor = None;

        while iterations < self.options.max_iterations {
            iterations += 1;
            // d[Re V; Im V] / d[|V|; θ], block diagonal per bus and phase.
            let (cs, sn): (Vec<f64>, Vec<f64>) = ang.iter().map(|&a| (libm::cos(a), libm::sin(a))).unzip();
            let mut vr = DMatrix::<f64>::zeros(2 * n, 1);
            for k in 0..n {
                vr[(k, 0)] = base * mag[k] * cs[k];
                vr[(n + k, 0)] = base * mag[k] * sn[k];
            }
            let resid = &w_z - &w_op * &vr;
            let mut jac = DMatrix::<f64>::zeros(2 * r, 2 * n);
            for k in 0..n {
                let (dre_dm, dim_dm) = (base * cs[k], base * sn[k]);
                let (dre_da, dim_da) = (-vr[(n + k, 0)], vr[(k, 0)]);
                for i in 0..2 * r {
                    let a = w_op[(i, k)];
                    let b = w_op[(i, n + k)];
                    jac[(i, k)] = a * dre_dm + b * dim_dm;
                    jac[(i, n + k)] = a * dre_da + b * dim_da;
                }
            }
            let gain = jac.tr_mul(&jac);
            let rhs = jac.tr_mul(&resid);
            let factor = SymmetricFactor::new(&gain, 1e-14)
                .map_err(|_| DsseError::NotObservable("gain matrix is singular".into()))?;
            let dx = factor.solve(&rhs);
            step_norm = dx.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            for k in 0..n {
                mag[k] += dx[(k, 0)];
                ang[k] += dx[(n + k, 0)];
            }
            gain_factor = Some(factor);
            if step_norm < self.options.tolerance {
                converged = true;
                break;
            }
        }

        let volts: Vec<Complex64> = (0..n)
            .map(|k| Complex64::from_polar(base * mag[k], ang[k]))
            .collect();
        let vvec = DMatrix::from_fn(2 * n, 1, |i, _| {
            if i < n {
                volts[i].re
            } else {
                volts[i - n].im
            }
        });
        let res = &w_z - &w_op * &vvec;
        let objective = res.norm_squared();

        // Polar covariance mapped to per-unit rectangular parts of the non-reference states.
        let factor = gain_factor.expect("at least one iteration");
        let polar_cov = factor.solve(&DMatrix::identity(2 * n, 2 * n));
        let mut g = DMatrix::<f64>::zeros(2 * m, 2 * n);
        for s in 0..m {
            let k = p + s;
            let (c, sn) = (libm::cos(ang[k]), libm::sin(ang[k]));
            g[(s, k)] = c;
            g[(s, n + k)] = -mag[k] * sn;
            g[(m + s, k)] = sn;
            g[(m + s, n + k)] = mag[k] * c;
        }
        let voltage_covariance = &g * polar_cov * g.transpose();
        let trace = voltage_covariance.trace();

        Ok(WlsResult {
            voltages: CVector::from_iterator(m, volts[p..].iter().copied()),
            reference_voltage: volts[..p].to_vec(),
            magnitudes: mag[p..].to_vec(),
            angles: ang[p..].to_vec(),
            iterations,
            converged,
            residual_norm: step_norm,
            objective,
            voltage_covariance,
            quality: quality_from_trace(trace),
        })
    }
}

/// One-shot WLS estimate for a single measurement step.
pub fn wls_estimate(net: &RadialNetwork, step: &MeasurementStep, options: WlsOptions) -> Result<WlsResult> {
    WlsEstimator::new(net, options)?.estimate(step)
}
