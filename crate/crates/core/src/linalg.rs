//! Small dense linear-algebra helpers shared by the estimator modules.

use nalgebra::DMatrix;

use crate::{CMatrix, Complex64, DsseError, Result};

/// Relative pivot tolerance for measured-block factorizations.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// Smallest eigenvalue of a real symmetric matrix. Returns `+inf` for an empty matrix.
pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    let sym = symmetrize(m);
    sym.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// `(m + mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// `(m + mᴴ) / 2`.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).map(|z| z * 0.5)
}

/// `(m + mᵀ) / 2` for complex matrices.
pub fn symmetrize_complex(m: &CMatrix) -> CMatrix {
    (m + m.transpose()).map(|z| z * 0.5)
}

fn max_abs_sqr(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max)
}

/// True when `m` is Hermitian up to `rel_tol` relative to its largest entry.
pub fn is_hermitian(m: &CMatrix, rel_tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let tol = rel_tol * rel_tol * max_abs_sqr(m).max(f64::MIN_POSITIVE);
    let n = m.nrows();
    for i in 0..n {
        for j in i..n {
            if (m[(i, j)] - m[(j, i)].conj()).norm_sqr() > tol {
                return false;
            }
        }
    }
    true
}

/// True when `m == mᵀ` up to `rel_tol` relative to its largest entry.
pub fn is_complex_symmetric(m: &CMatrix, rel_tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let tol = rel_tol * rel_tol * max_abs_sqr(m).max(f64::MIN_POSITIVE);
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).norm_sqr() > tol {
                return false;
            }
        }
    }
    true
}

/// Cholesky factor of a symmetric positive definite matrix, rejecting pivots
/// below `rel_tol · max(diag)`.
#[derive(Debug, Clone)]
pub struct SymmetricFactor {
    l: DMatrix<f64>,
}

impl SymmetricFactor {
    pub fn new(a: &DMatrix<f64>, rel_tol: f64) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(DsseError::Dimension {
                context: "symmetric factorization",
                expected: n,
                actual: a.ncols(),
            });
        }
        let max_diag = (0..n).map(|i| a[(i, i)]).fold(0.0, f64::max);
        let floor = rel_tol * max_diag;
        let mut l = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d.is_nan() || d <= floor || d <= 0.0 {
                return Err(DsseError::DegenerateMeasurements { pivot: j });
            }
            let ljj = libm::sqrt(d);
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Solves `A X = B` in place of a copy of `b`.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = self.solve_lower(b);
        let n = self.dim();
        for c in 0..x.ncols() {
            for i in (0..n).rev() {
                let mut s = x[(i, c)];
                for k in (i + 1)..n {
                    s -= self.l[(k, i)] * x[(k, c)];
                }
                x[(i, c)] = s / self.l[(i, i)];
            }
        }
        x
    }

    /// Solves `L Y = B` (the whitening half of the factorization).
    pub fn solve_lower(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let mut y = b.clone();
        for c in 0..y.ncols() {
            for i in 0..n {
                let mut s = y[(i, c)];
                for k in 0..i {
                    s -= self.l[(i, k)] * y[(k, c)];
                }
                y[(i, c)] = s / self.l[(i, i)];
            }
        }
        y
    }
}

/// Inverse of a square complex matrix, or a degenerate-measurement error.
pub fn invert_complex(m: &CMatrix) -> Result<CMatrix> {
    m.clone()
        .lu()
        .try_inverse()
        .ok_or(DsseError::DegenerateMeasurements { pivot: 0 })
}

/// Block-diagonal matrix with `copies` repetitions of `block`.
pub fn repeat_block_diag(block: &CMatrix, copies: usize) -> CMatrix {
    let (r, c) = block.shape();
    let mut out = CMatrix::zeros(r * copies, c * copies);
    for k in 0..copies {
        out.view_mut((k * r, k * c), (r, c)).copy_from(block);
    }
    out
}

/// Rows `rows` and columns `cols` of `m`.
pub fn select<T: nalgebra::Scalar + Copy>(
    m: &DMatrix<T>,
    rows: &[usize],
    cols: &[usize],
) -> DMatrix<T> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Complex identity of size `n`.
pub fn complex_identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Sum of the real parts of the diagonal.
pub fn real_trace(m: &CMatrix) -> f64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)].re).sum()
}

pub(crate) fn czero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

