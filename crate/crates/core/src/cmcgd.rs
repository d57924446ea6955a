//! Conditioning of a complex Gaussian on observed entries.
//!
//! The normative computation conditions the real composite Gaussian over
//! `[Re x; Im x]`. [`condition_widely_linear`] is the equivalent closed form in
//! terms of `Γ` and `C`, and [`conditioning_gains`] recovers the widely linear
//! gains `A`, `B` of the mean update
//! `μ₂' = μ₂ + A(y₁ − μ₁) + B(y₁ − μ₁)*`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::complexstats::ComplexGaussian;
use crate::linalg::{invert_complex, select, symmetrize, SymmetricFactor, PIVOT_TOLERANCE};
use crate::{CMatrix, CVector, Complex64, DsseError, Result};

/// Split of a state vector into measured and unmeasured entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    measured: Vec<usize>,
    unmeasured: Vec<usize>,
}

impl Partition {
    /// `measured` keeps the given order (observations follow it); the
    /// unmeasured entries are the ascending complement within `0..dim`.
    pub fn new(measured: Vec<usize>, dim: usize) -> Result<Self> {
        let mut seen = vec![false; dim];
        for &i in &measured {
            if i >= dim {
                return Err(DsseError::Dimension {
                    context: "measured index",
                    expected: dim,
                    actual: i,
                });
            }
            if seen[i] {
                return Err(DsseError::InvalidInput(alloc::format!("index {i} measured twice")));
            }
            seen[i] = true;
        }
        let unmeasured = (0..dim).filter(|&i| !seen[i]).collect();
        Ok(Self {
            measured,
            unmeasured,
        })
    }

    /// Explicit split; the two lists must be disjoint and cover `0..len`.
    pub fn from_parts(measured: Vec<usize>, unmeasured: Vec<usize>) -> Result<Self> {
        let dim = measured.len() + unmeasured.len();
        let mut seen = vec![false; dim];
        for &i in measured.iter().chain(&unmeasured) {
            if i >= dim || seen[i] {
                return Err(DsseError::InvalidInput(alloc::format!(
                    "partition lists overlap or leave gaps at index {i}"
                )));
            }
            seen[i] = true;
        }
        Ok(Self {
            measured,
            unmeasured,
        })
    }

    pub fn measured(&self) -> &[usize] {
        &self.measured
    }

    pub fn unmeasured(&self) -> &[usize] {
        &self.unmeasured
    }

    pub fn dim(&self) -> usize {
        self.measured.len() + self.unmeasured.len()
    }
}

/// Widely linear gains of the conditional mean.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditioningGains {
    pub a: CMatrix,
    pub b: CMatrix,
    /// `Γ₁₁* − C₁₁ᴴ Γ₁₁⁻¹ C₁₁`.
    pub lambda: CMatrix,
}

fn composite_indices(idx: &[usize], n: usize) -> Vec<usize> {
    idx.iter().copied().chain(idx.iter().map(|i| i + n)).collect()
}

fn check(model: &ComplexGaussian, part: &Partition, observed: Option<&CVector>) -> Result<()> {
    if part.dim() != model.dim() {
        return Err(DsseError::Dimension {
            context: "partition",
            expected: model.dim(),
            actual: part.dim(),
        });
    }
    if let Some(obs) = observed {
        if obs.len() != part.measured().len() {
            return Err(DsseError::Dimension {
                context: "observed values",
                expected: part.measured().len(),
                actual: obs.len(),
            });
        }
    }
    Ok(())
}

struct CompositeSplit {
    factor: SymmetricFactor,
    k_um: DMatrix<f64>,
    k_uu: DMatrix<f64>,
}

fn split_composite(model: &ComplexGaussian, part: &Partition) -> Result<CompositeSplit> {
    let n = model.dim();
    let k = model.composite_covariance();
    let m_idx = composite_indices(part.measured(), n);
    let u_idx = composite_indices(part.unmeasured(), n);
    let k_mm = select(&k, &m_idx, &m_idx);
    Ok(CompositeSplit {
        factor: SymmetricFactor::new(&k_mm, PIVOT_TOLERANCE)?,
        k_um: select(&k, &u_idx, &m_idx),
        k_uu: select(&k, &u_idx, &u_idx),
    })
}

fn innovation(model: &ComplexGaussian, part: &Partition, observed: &CVector) -> DVector<f64> {
    let k = part.measured().len();
    DVector::from_fn(2 * k, |i, _| {
        let d = observed[i % k] - model.mean()[part.measured()[i % k]];
        if i < k {
            d.re
        } else {
            d.im
        }
    })
}

/// Distribution of the unmeasured entries given the measured ones.
///
/// Fails with [`DsseError::DegenerateMeasurements`] when the measured block of
/// the composite covariance is singular to a relative pivot tolerance of 1e-12.
pub fn condition(model: &ComplexGaussian, part: &Partition, observed: &CVector) -> Result<ComplexGaussian> {
    check(model, part, Some(observed))?;
    if part.measured().is_empty() {
        return model.marginal(part.unmeasured());
    }
    let s = split_composite(model, part)?;
    let mu = model.composite_mean();
    let u_idx = composite_indices(part.unmeasured(), model.dim());
    let mu_u = DVector::from_fn(u_idx.len(), |i, _| mu[u_idx[i]]);

    let d = innovation(model, part, observed);
    let w = s.factor.solve(&DMatrix::from_column_slice(d.len(), 1, d.as_slice()));
    let mean = mu_u + &s.k_um * w.column(0);

    let x = s.factor.solve(&s.k_um.transpose());
    let cov = symmetrize(&(&s.k_uu - &s.k_um * x));
    ComplexGaussian::from_composite(&mean, &cov)
}

/// `A` and `B` read off the real conditional-mean operator
/// `G = K_UM K_MM⁻¹ = [[G_rr, G_ri], [G_ir, G_ii]]`:
/// `A = ½[(G_rr + G_ii) + j(G_ir − G_ri)]`, `B = ½[(G_rr − G_ii) + j(G_ir + G_ri)]`.
pub fn conditioning_gains(model: &ComplexGaussian, part: &Partition) -> Result<ConditioningGains> {
    check(model, part, None)?;
    let (k, u) = (part.measured().len(), part.unmeasured().len());
    let s = split_composite(model, part)?;
    let g = s.factor.solve(&s.k_um.transpose()).transpose();
    let blk = |r: usize, c: usize| g.view((r * u, c * k), (u, k)).into_owned();
    let (g_rr, g_ri, g_ir, g_ii) = (blk(0, 0), blk(0, 1), blk(1, 0), blk(1, 1));
    let a = CMatrix::from_fn(u, k, |i, j| {
        Complex64::new(g_rr[(i, j)] + g_ii[(i, j)], g_ir[(i, j)] - g_ri[(i, j)]) * 0.5
    });
    let b = CMatrix::from_fn(u, k, |i, j| {
        Complex64::new(g_rr[(i, j)] - g_ii[(i, j)], g_ir[(i, j)] + g_ri[(i, j)]) * 0.5
    });

    let m = part.measured();
    let g11 = select(model.gamma(), m, m);
    let c11 = select(model.c(), m, m);
    let lambda = g11.map(|z| z.conj()) - c11.adjoint() * invert_complex(&g11)? * &c11;
    Ok(ConditioningGains { a, b, lambda })
}

/// Closed-form widely linear conditioning in `Γ`/`C` blocks (subscript 1 =
/// measured, 2 = unmeasured):
///
/// ```text
/// Λ    = Γ₁₁* − C₁₁* Γ₁₁⁻¹ C₁₁
/// B    = (C₂₁ − Γ₂₁ Γ₁₁⁻¹ C₁₁) Λ⁻¹
/// A    = (Γ₂₁ − C₂₁ Γ₁₁⁻* C₁₁*) Λ⁻*
/// Γ₂₂' = Γ₂₂ − A Γ₁₂ − B C₁₂*
/// C₂₂' = C₂₂ − A C₁₂ − B Γ₁₂*
/// ```
pub fn condition_widely_linear(
    model: &ComplexGaussian,
    part: &Partition,
    observed: &CVector,
) -> Result<ComplexGaussian> {
    check(model, part, Some(observed))?;
    if part.measured().is_empty() {
        return model.marginal(part.unmeasured());
    }
    let (m, u) = (part.measured(), part.unmeasured());
    let g11 = select(model.gamma(), m, m);
    let c11 = select(model.c(), m, m);
    let g21 = select(model.gamma(), u, m);
    let c21 = select(model.c(), u, m);
    let g22 = select(model.gamma(), u, u);
    let c22 = select(model.c(), u, u);

    let conj = |x: &CMatrix| x.map(|z| z.conj());
    let g11_inv = invert_complex(&g11)?;
    let lambda = conj(&g11) - conj(&c11) * &g11_inv * &c11;
    let lambda_inv = invert_complex(&lambda)?;
    let b = (&c21 - &g21 * &g11_inv * &c11) * &lambda_inv;
    let a = (&g21 - &c21 * conj(&g11_inv) * conj(&c11)) * conj(&lambda_inv);

    let d = CVector::from_fn(m.len(), |i, _| observed[i] - model.mean()[m[i]]);
    let mu2 = CVector::from_fn(u.len(), |i, _| model.mean()[u[i]]);
    let mean = mu2 + &a * &d + &b * d.map(|z| z.conj());

    let g12 = g21.adjoint();
    let c12 = c21.transpose();
    let gamma = &g22 - &a * &g12 - &b * conj(&c12);
    let c = &c22 - &a * &c12 - &b * conj(&g12);
    ComplexGaussian::new(mean, crate::linalg::hermitize(&gamma), crate::linalg::symmetrize_complex(&c))
}

/// Conditions `x` on `y = H x + e`, with `e` independent of `x` and its real
/// and imaginary parts independent with variances `noise[i]`. Equal to
/// building the joint of `[x; y]` and calling [`condition`] on the `y` block,
/// without forming the joint.
pub fn condition_on_linear_observation(
    model: &ComplexGaussian,
    h: &CMatrix,
    noise: &[(f64, f64)],
    observed: &CVector,
) -> Result<ComplexGaussian> {
    let (r, n) = (h.nrows(), model.dim());
    if h.ncols() != n {
        return Err(DsseError::Dimension {
            context: "observation matrix",
            expected: n,
            actual: h.ncols(),
        });
    }
    if noise.len() != r || observed.len() != r {
        return Err(DsseError::Dimension {
            context: "observed values",
            expected: r,
            actual: if noise.len() != r { noise.len() } else { observed.len() },
        });
    }
    if r == 0 {
        return Ok(model.clone());
    }
    // Real composite form: [Re y; Im y] = [[Hr, −Hi], [Hi, Hr]] [Re x; Im x].
    let mut hc = DMatrix::<f64>::zeros(2 * r, 2 * n);
    for i in 0..r {
        for j in 0..n {
            let v = h[(i, j)];
            hc[(i, j)] = v.re;
            hc[(i, n + j)] = -v.im;
            hc[(r + i, j)] = v.im;
            hc[(r + i, n + j)] = v.re;
        }
    }
    let mut k = model.composite_covariance();
    let mut p = DMatrix::<f64>::zeros(2 * n, 2 * r);
    for a in 0..2 * r {
        for b in 0..2 * n {
            let v = hc[(a, b)];
            if v != 0.0 {
                p.column_mut(a).axpy(v, &k.column(b), 1.0);
            }
        }
    }
    let mut s = &hc * &p;
    for i in 0..r {
        s[(i, i)] += noise[i].0;
        s[(r + i, r + i)] += noise[i].1;
    }
    let factor = SymmetricFactor::new(&symmetrize(&s), PIVOT_TOLERANCE)?;

    let mu = model.composite_mean();
    let pred = &hc * &mu;
    let d = DMatrix::from_fn(2 * r, 1, |i, _| {
        let y = observed[i % r];
        (if i < r { y.re } else { y.im }) - pred[i]
    });
    let w = factor.solve(&d);
    let mean = mu + &p * w.column(0);

    let x = factor.solve(&p.transpose());
    k.gemm(-1.0, &p, &x, 1.0);
    for j in 0..k.ncols() {
        for i in 0..j {
            let v = 0.5 * (k[(i, j)] + k[(j, i)]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(ComplexGaussian::from_symmetric_composite(&mean, &k))
}

/// Observations of one step of a stacked window.
#[derive(Clone, Debug, PartialEq)]
pub struct StepObservation {
    /// Position in the window, `0` oldest, `nt − 1` current.
    pub step: usize,
    /// Indices within that step's block.
    pub measured: Vec<usize>,
    pub observed: CVector,
}

/// Conditions a model spanning `nt` stacked steps on every observation in the
/// window at once. The result covers all unmeasured entries of all steps.
pub fn condition_temporal(
    model_nt: &ComplexGaussian,
    window: &[StepObservation],
    nt: usize,
) -> Result<ComplexGaussian> {
    if nt == 0 || !model_nt.dim().is_multiple_of(nt) {
        return Err(DsseError::InvalidInput(alloc::format!(
            "model of dimension {} does not split into {nt} steps",
            model_nt.dim()
        )));
    }
    let block = model_nt.dim() / nt;
    let mut measured = Vec::new();
    let mut values = Vec::new();
    for obs in window {
        if obs.step >= nt {
            return Err(DsseError::InvalidInput(alloc::format!(
                "observation step {} outside a {nt}-step window",
                obs.step
            )));
        }
        if obs.observed.len() != obs.measured.len() {
            return Err(DsseError::Dimension {
                context: "observed values",
                expected: obs.measured.len(),
                actual: obs.observed.len(),
            });
        }
        for (&i, &v) in obs.measured.iter().zip(obs.observed.iter()) {
            if i >= block {
                return Err(DsseError::Dimension {
                    context: "measured index within step",
                    expected: block,
                    actual: i,
                });
            }
            measured.push(obs.step * block + i);
            values.push(v);
        }
    }
    let part = Partition::new(measured, model_nt.dim())?;
    condition(model_nt, &part, &CVector::from_vec(values))
}
