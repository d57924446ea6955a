use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::CorrelationMatrix;
use crate::{CMatrix, Complex64, DsseError, Result};

/// Standard deviation of a pseudo or real measurement from its percentage
/// error, applied separately to the real and imaginary parts.
pub fn sd_from_error(mean: Complex64, epsilon_pct: f64) -> Complex64 {
    mean * (epsilon_pct / 300.0)
}

/// Covariance of `[r; s]` for `x = r + j·s`, kept as four blocks.
/// `ri` holds `E[r sᵀ]` and `ir` holds `E[s rᵀ]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RealCompositeCovariance {
    pub rr: DMatrix<f64>,
    pub ri: DMatrix<f64>,
    pub ir: DMatrix<f64>,
    pub ii: DMatrix<f64>,
}

impl RealCompositeCovariance {
    pub fn dim(&self) -> usize {
        self.rr.nrows()
    }

    /// `[[rr, ri], [ir, ii]]`.
    pub fn composite(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut k = DMatrix::zeros(2 * n, 2 * n);
        k.view_mut((0, 0), (n, n)).copy_from(&self.rr);
        k.view_mut((0, n), (n, n)).copy_from(&self.ri);
        k.view_mut((n, 0), (n, n)).copy_from(&self.ir);
        k.view_mut((n, n), (n, n)).copy_from(&self.ii);
        k
    }

    pub fn from_composite(k: &DMatrix<f64>) -> Result<Self> {
        if k.nrows() != k.ncols() || !k.nrows().is_multiple_of(2) {
            return Err(DsseError::Dimension {
                context: "real composite covariance",
                expected: k.nrows() + k.nrows() % 2,
                actual: k.ncols(),
            });
        }
        let n = k.nrows() / 2;
        Ok(Self {
            rr: k.view((0, 0), (n, n)).into_owned(),
            ri: k.view((0, n), (n, n)).into_owned(),
            ir: k.view((n, 0), (n, n)).into_owned(),
            ii: k.view((n, n), (n, n)).into_owned(),
        })
    }
}

/// Covariance `Γ` and pseudo-covariance `C` of variables whose real and
/// imaginary standard deviations are the components of `sd`, correlated as in
/// `cr`.
pub fn assemble_complex_covariance(
    sd: &[Complex64],
    cr: &CorrelationMatrix,
) -> Result<(CMatrix, CMatrix)> {
    let n = cr.n_vars() * cr.nt();
    if sd.len() != n {
        return Err(DsseError::Dimension {
            context: "standard deviations",
            expected: n,
            actual: sd.len(),
        });
    }
    if cr.min_eigenvalue() < -1e-10 {
        return Err(DsseError::NotPositiveSemidefinite {
            min_eigenvalue: cr.min_eigenvalue(),
        });
    }
    let sr: Vec<f64> = sd.iter().map(|z| z.re.abs()).collect();
    let si: Vec<f64> = sd.iter().map(|z| z.im.abs()).collect();
    let m = cr.matrix();
    let mut gamma = CMatrix::zeros(n, n);
    let mut c = CMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            let rr = sr[i] * sr[j] * m[(i, j)];
            let ri = sr[i] * si[j] * m[(i, n + j)];
            let ir = si[i] * sr[j] * m[(n + i, j)];
            let ii = si[i] * si[j] * m[(n + i, n + j)];
            gamma[(i, j)] = Complex64::new(rr + ii, ir - ri);
            c[(i, j)] = Complex64::new(rr - ii, ir + ri);
        }
    }
    Ok((gamma, c))
}

pub fn complex_from_real_composite(k: &RealCompositeCovariance) -> (CMatrix, CMatrix) {
    let n = k.dim();
    let gamma = CMatrix::from_fn(n, n, |i, j| {
        Complex64::new(k.rr[(i, j)] + k.ii[(i, j)], k.ir[(i, j)] - k.ri[(i, j)])
    });
    let c = CMatrix::from_fn(n, n, |i, j| {
        Complex64::new(k.rr[(i, j)] - k.ii[(i, j)], k.ir[(i, j)] + k.ri[(i, j)])
    });
    (gamma, c)
}

pub fn real_composite_from_complex(gamma: &CMatrix, c: &CMatrix) -> Result<RealCompositeCovariance> {
    let n = gamma.nrows();
    if gamma.ncols() != n || c.nrows() != n || c.ncols() != n {
        return Err(DsseError::Dimension {
            context: "pseudo-covariance",
            expected: n,
            actual: c.nrows(),
        });
    }
    Ok(RealCompositeCovariance {
        rr: DMatrix::from_fn(n, n, |i, j| 0.5 * (gamma[(i, j)].re + c[(i, j)].re)),
        ii: DMatrix::from_fn(n, n, |i, j| 0.5 * (gamma[(i, j)].re - c[(i, j)].re)),
        ir: DMatrix::from_fn(n, n, |i, j| 0.5 * (gamma[(i, j)].im + c[(i, j)].im)),
        ri: DMatrix::from_fn(n, n, |i, j| 0.5 * (c[(i, j)].im - gamma[(i, j)].im)),
    })
}
