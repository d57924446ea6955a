use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::{complex_from_real_composite, real_composite_from_complex, RealCompositeCovariance};
use crate::linalg::{hermitize, is_complex_symmetric, is_hermitian, min_symmetric_eigenvalue, select, symmetrize, symmetrize_complex};
use crate::{CMatrix, CVector, Complex64, DsseError, Result};

/// Multivariate complex Gaussian described by mean, covariance `Γ` and
/// pseudo-covariance `C`. Nothing is assumed about propriety.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexGaussian {
    mean: CVector,
    gamma: CMatrix,
    c: CMatrix,
}

impl ComplexGaussian {
    /// `Γ` must be Hermitian and `C` symmetric to a relative tolerance of 1e-9.
    /// Both are stored exactly (anti)symmetrized.
    pub fn new(mean: CVector, gamma: CMatrix, c: CMatrix) -> Result<Self> {
        let n = mean.len();
        for (context, m) in [("covariance", &gamma), ("pseudo-covariance", &c)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(DsseError::Dimension {
                    context,
                    expected: n,
                    actual: if m.nrows() != n { m.nrows() } else { m.ncols() },
                });
            }
        }
        if !is_hermitian(&gamma, 1e-9) {
            return Err(DsseError::InvalidInput("covariance is not Hermitian".into()));
        }
        if !is_complex_symmetric(&c, 1e-9) {
            return Err(DsseError::InvalidInput("pseudo-covariance is not symmetric".into()));
        }
        Ok(Self {
            mean,
            gamma: hermitize(&gamma),
            c: symmetrize_complex(&c),
        })
    }

    /// Gaussian over `[Re x; Im x]` with mean `mean` and covariance `k`.
    pub fn from_composite(mean: &DVector<f64>, k: &DMatrix<f64>) -> Result<Self> {
        if !mean.len().is_multiple_of(2) || k.nrows() != mean.len() || k.ncols() != mean.len() {
            return Err(DsseError::Dimension {
                context: "real composite Gaussian",
                expected: mean.len(),
                actual: k.nrows(),
            });
        }
        let n = mean.len() / 2;
        let mu = CVector::from_fn(n, |i, _| Complex64::new(mean[i], mean[n + i]));
        let blocks = RealCompositeCovariance::from_composite(&symmetrize(k))?;
        let (gamma, c) = complex_from_real_composite(&blocks);
        Self::new(mu, gamma, c)
    }

    /// For callers whose `Γ` is exactly Hermitian and `C` exactly symmetric by
    /// construction.
    pub(crate) fn from_parts_unchecked(mean: CVector, gamma: CMatrix, c: CMatrix) -> Self {
        debug_assert!(is_hermitian(&gamma, 0.0) && is_complex_symmetric(&c, 0.0));
        Self { mean, gamma, c }
    }

    /// As [`from_composite`](Self::from_composite) for a covariance that is
    /// already exactly symmetric, which makes `Γ` Hermitian and `C` symmetric
    /// by construction.
    pub(crate) fn from_symmetric_composite(mean: &DVector<f64>, k: &DMatrix<f64>) -> Self {
        let n = mean.len() / 2;
        let mu = CVector::from_fn(n, |i, _| Complex64::new(mean[i], mean[n + i]));
        let gamma = CMatrix::from_fn(n, n, |i, j| {
            Complex64::new(k[(i, j)] + k[(n + i, n + j)], k[(n + i, j)] - k[(i, n + j)])
        });
        let c = CMatrix::from_fn(n, n, |i, j| {
            Complex64::new(k[(i, j)] - k[(n + i, n + j)], k[(n + i, j)] + k[(i, n + j)])
        });
        Self { mean: mu, gamma, c }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &CVector {
        &self.mean
    }

    pub fn gamma(&self) -> &CMatrix {
        &self.gamma
    }

    pub fn c(&self) -> &CMatrix {
        &self.c
    }

    pub fn composite_mean(&self) -> DVector<f64> {
        let n = self.dim();
        DVector::from_fn(2 * n, |i, _| {
            if i < n {
                self.mean[i].re
            } else {
                self.mean[i - n].im
            }
        })
    }

    pub fn composite_blocks(&self) -> RealCompositeCovariance {
        real_composite_from_complex(&self.gamma, &self.c).expect("shapes checked at construction")
    }

    /// Covariance of `[Re x; Im x]`.
    pub fn composite_covariance(&self) -> DMatrix<f64> {
        let n = self.dim();
        let (g, c) = (&self.gamma, &self.c);
        DMatrix::from_fn(2 * n, 2 * n, |i, j| {
            let (a, b) = (i % n, j % n);
            let (g, c) = (g[(a, b)], c[(a, b)]);
            0.5 * match (i < n, j < n) {
                (true, true) => g.re + c.re,
                (false, false) => g.re - c.re,
                (false, true) => g.im + c.im,
                (true, false) => c.im - g.im,
            }
        })
    }

    /// `[[Γ, C], [C*, Γ*]]`.
    pub fn augmented_covariance(&self) -> CMatrix {
        let n = self.dim();
        let mut r = CMatrix::zeros(2 * n, 2 * n);
        r.view_mut((0, 0), (n, n)).copy_from(&self.gamma);
        r.view_mut((0, n), (n, n)).copy_from(&self.c);
        r.view_mut((n, 0), (n, n)).copy_from(&self.c.map(|z| z.conj()));
        r.view_mut((n, n), (n, n)).copy_from(&self.gamma.map(|z| z.conj()));
        r
    }

    /// Smallest eigenvalue of the real composite covariance. The augmented
    /// covariance has the same spectrum scaled by 2.
    pub fn min_composite_eigenvalue(&self) -> f64 {
        min_symmetric_eigenvalue(&self.composite_covariance())
    }

    /// Joint distribution of a subset of the variables, in the given order.
    pub fn marginal(&self, idx: &[usize]) -> Result<Self> {
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.dim()) {
            return Err(DsseError::Dimension {
                context: "marginal index",
                expected: self.dim(),
                actual: bad,
            });
        }
        let mean = CVector::from_iterator(idx.len(), idx.iter().map(|&i| self.mean[i]));
        Ok(Self {
            mean,
            gamma: select(&self.gamma, idx, idx),
            c: select(&self.c, idx, idx),
        })
    }

    /// Distribution of `T x + b` for a complex matrix `T` (strictly linear map).
    pub fn linear_map(&self, t: &CMatrix, offset: &CVector) -> Result<Self> {
        if t.ncols() != self.dim() || offset.len() != t.nrows() {
            return Err(DsseError::Dimension {
                context: "linear map",
                expected: self.dim(),
                actual: t.ncols(),
            });
        }
        let mean = t * &self.mean + offset;
        let gamma = t * &self.gamma * t.adjoint();
        let c = t * &self.c * t.transpose();
        Ok(Self {
            mean,
            gamma: hermitize(&gamma),
            c: symmetrize_complex(&c),
        })
    }

    /// Variance of each real part and each imaginary part.
    pub fn component_variances(&self) -> Vec<(f64, f64)> {
        (0..self.dim())
            .map(|i| {
                let g = self.gamma[(i, i)].re;
                let c = self.c[(i, i)].re;
                (0.5 * (g + c), 0.5 * (g - c))
            })
            .collect()
    }
}
