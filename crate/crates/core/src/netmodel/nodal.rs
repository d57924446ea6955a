//! Nodal-admittance solution of the same network, independent of the BIBC/BCBV path.

use crate::linalg::czero;
use crate::{CMatrix, CVector, Complex64, DsseError, Result};

use super::RadialNetwork;

/// Bus admittance matrix over all buses: reference bus first, then state order.
pub fn admittance_matrix(net: &RadialNetwork) -> Result<CMatrix> {
    let p = net.phase_count();
    let n = net.bus_count();
    let mut y = CMatrix::from_element(n * p, n * p, czero());
    let slot = |id| match net.position(id) {
        Some(pos) => pos + 1,
        None => 0,
    };
    for br in net.branches() {
        let yb = br
            .impedance
            .clone()
            .lu()
            .try_inverse()
            .ok_or_else(|| {
                DsseError::Structure(alloc::format!(
                    "branch {}->{} impedance is singular",
                    br.from, br.to
                ))
            })?;
        let a = slot(br.from) * p;
        let b = slot(br.to) * p;
        for i in 0..p {
            for j in 0..p {
                let v = yb[(i, j)];
                y[(a + i, a + j)] += v;
                y[(b + i, b + j)] += v;
                y[(a + i, b + j)] -= v;
                y[(b + i, a + j)] -= v;
            }
        }
    }
    Ok(y)
}

/// Inverse of the admittance matrix reduced to the non-reference buses.
/// Without shunt elements this is the operator mapping load draws to voltage drops.
pub fn nodal_dlf(net: &RadialNetwork) -> Result<CMatrix> {
    let p = net.phase_count();
    let y = admittance_matrix(net)?;
    let m = net.state_len();
    let yll = y.view((p, p), (m, m)).into_owned();
    yll.lu()
        .try_inverse()
        .ok_or_else(|| DsseError::Structure("reduced admittance matrix is singular".into()))
}

/// Solves `Y_LL v_L = −i − Y_LR v_ref` for the non-reference bus voltages.
pub fn nodal_solve(net: &RadialNetwork, injections: &CVector, vref: &[Complex64]) -> Result<CVector> {
    let p = net.phase_count();
    let m = net.state_len();
    if injections.len() != m {
        return Err(DsseError::Dimension {
            context: "injected currents",
            expected: m,
            actual: injections.len(),
        });
    }
    if vref.len() != p {
        return Err(DsseError::Dimension {
            context: "reference voltage",
            expected: p,
            actual: vref.len(),
        });
    }
    let y = admittance_matrix(net)?;
    let yll = y.view((p, p), (m, m)).into_owned();
    let ylr = y.view((p, 0), (m, p)).into_owned();
    let vr = CVector::from_column_slice(vref);
    let rhs = -injections - ylr * vr;
    yll.lu()
        .solve(&rhs)
        .ok_or_else(|| DsseError::Structure("reduced admittance matrix is singular".into()))
}
