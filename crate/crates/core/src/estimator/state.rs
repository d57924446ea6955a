use alloc::vec::Vec;

use nalgebra::Matrix2;

use super::{Mode, QualityScope, StateKind};
use crate::complexstats::ComplexGaussian;
use crate::linalg::{hermitize, select, symmetrize_complex};
use crate::netmodel::FlowMatrices;
use crate::{CMatrix, CVector, Complex64, DsseError, Result};

/// Posterior (or prior) over all states of a window.
///
/// `mu_ibv` is section-major: injected currents, then branch currents, then
/// bus voltages, each `state_len · nt` long and stacked step-major. Per-state
/// variances come from the diagonal of the propagated covariance; the full
/// `Γ_IBV` and `C_IBV` are available on demand from [`gamma_ibv`](Self::gamma_ibv)
/// and [`c_ibv`](Self::c_ibv).
#[derive(Clone, Debug, PartialEq)]
pub struct StateEstimate {
    pub mode: Mode,
    pub nt: usize,
    pub state_len: usize,
    pub phase_count: usize,
    /// Nominal phase-to-ground voltage used for per-unit quantities.
    pub base_voltage: f64,
    pub mu_ibv: CVector,
    pub gamma_diag: Vec<f64>,
    pub c_diag: Vec<Complex64>,
    /// `None` where the mean is zero.
    pub var_mag: Vec<Option<f64>>,
    pub var_ang: Vec<Option<f64>>,
    pub quality: f64,
    pub quality_scope: QualityScope,
    pub iterations: usize,
    pub conditioning_passes: usize,
    /// Distribution of the stacked injections followed by the reference voltages.
    pub latent: ComplexGaussian,
}

fn section(kind: StateKind) -> usize {
    match kind {
        StateKind::InjectedCurrent => 0,
        StateKind::BranchCurrent => 1,
        StateKind::BusVoltage => 2,
    }
}

impl StateEstimate {
    /// Position of `(kind, step, state)` in `mu_ibv`.
    pub fn index(&self, kind: StateKind, step: usize, state: usize) -> usize {
        (section(kind) * self.nt + step) * self.state_len + state
    }

    /// The last step of the window.
    pub fn current_step(&self) -> usize {
        self.nt - 1
    }

    pub fn section(&self, kind: StateKind, step: usize) -> CVector {
        let start = self.index(kind, step, 0);
        self.mu_ibv.rows(start, self.state_len).into_owned()
    }

    pub fn voltages(&self, step: usize) -> CVector {
        self.section(StateKind::BusVoltage, step)
    }

    pub fn injections(&self, step: usize) -> CVector {
        self.section(StateKind::InjectedCurrent, step)
    }

    pub fn branch_currents(&self, step: usize) -> CVector {
        self.section(StateKind::BranchCurrent, step)
    }

    /// Covariance of `[Re X; Im X]` for the state at `mu_ibv[i]`.
    pub fn composite_block(&self, i: usize) -> Matrix2<f64> {
        composite_block(self.gamma_diag[i], self.c_diag[i])
    }

    /// Dense map from the latent vector to `[I; B; V]`.
    pub fn transform(&self, fm: &FlowMatrices) -> Result<CMatrix> {
        ibv_transform(fm, self.nt)
    }

    /// Full `Γ_IBV = T Γ Tᴴ`.
    pub fn gamma_ibv(&self, fm: &FlowMatrices) -> Result<CMatrix> {
        let t = self.transform(fm)?;
        Ok(hermitize(&(&t * self.latent.gamma() * t.adjoint())))
    }

    /// Full `C_IBV = T C Tᵀ`.
    pub fn c_ibv(&self, fm: &FlowMatrices) -> Result<CMatrix> {
        let t = self.transform(fm)?;
        Ok(symmetrize_complex(&(&t * self.latent.c() * t.transpose())))
    }
}

/// `[[K_rr, K_ri], [K_ir, K_ii]]` of one complex variable from its diagonal
/// covariance and pseudo-covariance entries.
pub fn composite_block(gamma: f64, c: Complex64) -> Matrix2<f64> {
    let cross = 0.5 * c.im;
    Matrix2::new(0.5 * (gamma + c.re), cross, cross, 0.5 * (gamma - c.re))
}

/// Delta-method variances of `|X|` and `∠X` at mean `x` with composite
/// covariance `k`: `xᵀ k x / ‖x‖²` and `x⊥ᵀ k x⊥ / ‖x‖⁴`, `x⊥ = [−Im, Re]`.
pub fn polar_variance(x: Complex64, k: &Matrix2<f64>) -> Option<(f64, f64)> {
    let n2 = x.norm_sqr();
    if n2 == 0.0 {
        return None;
    }
    let quad = |a: f64, b: f64| a * a * k[(0, 0)] + a * b * (k[(0, 1)] + k[(1, 0)]) + b * b * k[(1, 1)];
    let var_mag = quad(x.re, x.im) / n2;
    let var_ang = quad(-x.im, x.re) / (n2 * n2);
    Some((var_mag.max(0.0), var_ang.max(0.0)))
}

/// Per-state magnitude and angle variances of an estimate.
pub fn magnitude_angle_variance(est: &StateEstimate) -> (Vec<Option<f64>>, Vec<Option<f64>>) {
    (0..est.mu_ibv.len())
        .map(|i| match polar_variance(est.mu_ibv[i], &est.composite_block(i)) {
            Some((m, a)) => (Some(m), Some(a)),
            None => (None, None),
        })
        .unzip()
}

/// Magnitude and angle variance of one state, failing where the mean is zero.
pub fn state_polar_variance(est: &StateEstimate, i: usize) -> Result<(f64, f64)> {
    polar_variance(est.mu_ibv[i], &est.composite_block(i)).ok_or(DsseError::ZeroMagnitude(i))
}

/// `ln(1 / trace)`, with `+∞` for a zero trace.
pub fn quality_from_trace(trace: f64) -> f64 {
    if trace <= 0.0 {
        f64::INFINITY
    } else {
        libm::log(1.0 / trace)
    }
}

/// Quality index of the current step. Bus voltages enter in per unit; with
/// [`QualityScope::AllStates`] currents enter in amperes.
pub fn quality(est: &StateEstimate, scope: QualityScope) -> f64 {
    let step = est.current_step();
    let base2 = est.base_voltage * est.base_voltage;
    let sum = |kind| -> f64 {
        let start = est.index(kind, step, 0);
        est.gamma_diag[start..start + est.state_len].iter().sum()
    };
    let trace = match scope {
        QualityScope::BusVoltages => sum(StateKind::BusVoltage) / base2,
        QualityScope::AllStates => {
            sum(StateKind::InjectedCurrent) + sum(StateKind::BranchCurrent) + sum(StateKind::BusVoltage) / base2
        }
    };
    quality_from_trace(trace)
}

/// `T = [[I, 0], [BIBC, 0], [−DLF, E]]` per step, where `E` copies each
/// phase of the reference voltage to every bus.
pub fn ibv_transform(fm: &FlowMatrices, nt: usize) -> Result<CMatrix> {
    let m = fm.state_len();
    let p = fm.phase_count();
    let l = (m + p) * nt;
    let mut t = CMatrix::zeros(3 * m * nt, l);
    let tk = step_transform(fm);
    for k in 0..nt {
        let cols = step_columns(m, p, nt, k);
        for s in 0..3 {
            for i in 0..m {
                for (j, &c) in cols.iter().enumerate() {
                    t[((s * nt + k) * m + i, c)] = tk[(s * m + i, j)];
                }
            }
        }
    }
    Ok(t)
}

/// Latent columns belonging to step `k`: its injections, then its reference voltages.
pub(crate) fn step_columns(m: usize, p: usize, nt: usize, k: usize) -> Vec<usize> {
    (k * m..(k + 1) * m)
        .chain(m * nt + k * p..m * nt + (k + 1) * p)
        .collect()
}

/// `step_transform(fm) · x` without forming the transform.
fn apply_transform(fm: &FlowMatrices, x: &CMatrix) -> CMatrix {
    let m = fm.state_len();
    let p = fm.phase_count();
    let top = x.rows(0, m).into_owned();
    let (branch, drop) = fm.sweep(&top);
    let mut out = CMatrix::zeros(3 * m, x.ncols());
    out.rows_mut(0, m).copy_from(&top);
    out.rows_mut(m, m).copy_from(&branch);
    for c in 0..x.ncols() {
        for i in 0..m {
            out[(2 * m + i, c)] = x[(m + i % p, c)] - drop[(i, c)];
        }
    }
    out
}

/// One step's `3m × (m + p)` block of the transform.
pub(crate) fn step_transform(fm: &FlowMatrices) -> CMatrix {
    let m = fm.state_len();
    let p = fm.phase_count();
    let one = Complex64::new(1.0, 0.0);
    let mut t = CMatrix::zeros(3 * m, m + p);
    for i in 0..m {
        t[(i, i)] = one;
        t[(2 * m + i, m + i % p)] = one;
    }
    t.view_mut((m, 0), (m, m)).copy_from(&fm.bibc);
    t.view_mut((2 * m, 0), (m, m)).copy_from(&(-&fm.dlf));
    t
}

/// Propagates a latent distribution (stacked injections, then reference
/// voltages) through the load flow to every state of every step.
pub fn propagate_states(
    latent: &ComplexGaussian,
    fm: &FlowMatrices,
    nt: usize,
    mode: Mode,
    base_voltage: f64,
    quality_scope: QualityScope,
) -> Result<StateEstimate> {
    let m = fm.state_len();
    let p = fm.phase_count();
    if nt == 0 || latent.dim() != (m + p) * nt {
        return Err(DsseError::Dimension {
            context: "latent state",
            expected: (m + p) * nt.max(1),
            actual: latent.dim(),
        });
    }
    let n = 3 * m * nt;
    let mut mu = CVector::zeros(n);
    let mut gamma_diag = alloc::vec![0.0; n];
    let mut c_diag = alloc::vec![Complex64::new(0.0, 0.0); n];
    for k in 0..nt {
        let cols = step_columns(m, p, nt, k);
        let mean_k = CMatrix::from_iterator(cols.len(), 1, cols.iter().map(|&c| latent.mean()[c]));
        let g_k = select(latent.gamma(), &cols, &cols);
        let c_k = select(latent.c(), &cols, &cols);
        let mu_k = apply_transform(fm, &mean_k);
        let tg = apply_transform(fm, &g_k);
        let tc = apply_transform(fm, &c_k);
        for s in 0..3 {
            for i in 0..m {
                let r = s * m + i;
                let out = (s * nt + k) * m + i;
                mu[out] = mu_k[(r, 0)];
                let (g, c) = if s == 0 {
                    (tg[(r, i)].re, tc[(r, i)])
                } else {
                    // Row `r` of the transform is ±(row `i` of BIBC or DLF), plus the reference column for voltages.
                    let (row, sign) = if s == 1 { (fm.bibc.row(i), 1.0) } else { (fm.dlf.row(i), -1.0) };
                    let mut g = 0.0;
                    let mut c = Complex64::new(0.0, 0.0);
                    for (j, &t) in row.iter().enumerate() {
                        if t.re == 0.0 && t.im == 0.0 {
                            continue;
                        }
                        g += (tg[(r, j)] * t.conj()).re;
                        c += tc[(r, j)] * t;
                    }
                    g *= sign;
                    c *= sign;
                    if s == 2 {
                        g += tg[(r, m + i % p)].re;
                        c += tc[(r, m + i % p)];
                    }
                    (g, c)
                };
                gamma_diag[out] = g.max(0.0);
                c_diag[out] = c;
            }
        }
    }
    let mut est = StateEstimate {
        mode,
        nt,
        state_len: m,
        phase_count: p,
        base_voltage,
        mu_ibv: mu,
        gamma_diag,
        c_diag,
        var_mag: Vec::new(),
        var_ang: Vec::new(),
        quality: 0.0,
        quality_scope,
        iterations: 1,
        conditioning_passes: 0,
        latent: latent.clone(),
    };
    let (var_mag, var_ang) = magnitude_angle_variance(&est);
    est.var_mag = var_mag;
    est.var_ang = var_ang;
    est.quality = quality(&est, quality_scope);
    Ok(est)
}
