use nalgebra::DMatrix;

use super::CorrelationMatrix;
use crate::linalg::symmetrize;

pub const NEAREST_PD_TOLERANCE: f64 = 1e-8;
pub const NEAREST_PD_MAX_ITERATIONS: usize = 500;

fn project_psd(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = a.clone().symmetric_eigen();
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let q = &eig.eigenvectors;
    symmetrize(&(q * DMatrix::from_diagonal(&clipped) * q.transpose()))
}

fn unit_diagonal(a: &mut DMatrix<f64>) {
    for i in 0..a.nrows() {
        a[(i, i)] = 1.0;
    }
}

/// Nearest correlation matrix in the Frobenius norm, by alternating
/// projections with Dykstra's correction. Matrices that are already positive
/// semidefinite come back unchanged.
pub fn nearest_pd_correlation(cr: &CorrelationMatrix) -> CorrelationMatrix {
    if cr.min_eigenvalue() >= -1e-12 {
        return cr.clone();
    }
    let mut y = cr.matrix().clone();
    let mut correction = DMatrix::<f64>::zeros(y.nrows(), y.ncols());
    for _ in 0..NEAREST_PD_MAX_ITERATIONS {
        let r = &y - &correction;
        let x = project_psd(&r);
        correction = &x - &r;
        let mut next = x;
        unit_diagonal(&mut next);
        let change = (&next - &y).norm();
        let scale = y.norm();
        y = next;
        if change <= NEAREST_PD_TOLERANCE * scale {
            break;
        }
    }

    // The diagonal projection can leave tiny negative eigenvalues; clip once
    // more and rescale back to unit diagonal.
    let x = project_psd(&y);
    let d = x.diagonal().map(|v| 1.0 / libm::sqrt(v.max(f64::MIN_POSITIVE)));
    let mut out = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| d[i] * x[(i, j)] * d[j]);
    out = symmetrize(&out);
    unit_diagonal(&mut out);
    CorrelationMatrix::new(cr.nt(), cr.n_vars(), out).expect("projection keeps shape and symmetry")
}
