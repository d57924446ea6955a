use alloc::vec::Vec;

use crate::linalg::czero;
use crate::{CMatrix, CVector, Complex64, DsseError, Result};

use super::RadialNetwork;

/// Direct load-flow matrices of a radial network.
///
/// All three are `p·(n−1)` square, `p` being the phase count.
#[derive(Clone, Debug)]
pub struct FlowMatrices {
    phase_count: usize,
    /// Bus-injection to branch-current map.
    pub bibc: CMatrix,
    /// Branch-current to bus-voltage-drop map.
    pub bcbv: CMatrix,
    /// `bcbv · bibc`: injections to voltage drops.
    pub dlf: CMatrix,
    parent: Vec<Option<usize>>,
    impedances: Vec<CMatrix>,
}

impl FlowMatrices {
    pub fn phase_count(&self) -> usize {
        self.phase_count
    }

    /// Length of one step's stacked state vector.
    pub fn state_len(&self) -> usize {
        self.dlf.nrows()
    }

    /// Repeats per-phase reference voltages over every bus. A vector that
    /// already has one entry per state is returned unchanged.
    pub fn expand_reference(&self, vref: &[Complex64]) -> Result<CVector> {
        let m = self.state_len();
        let p = self.phase_count;
        if vref.len() == m {
            return Ok(CVector::from_column_slice(vref));
        }
        if vref.len() != p {
            return Err(DsseError::Dimension {
                context: "reference voltage",
                expected: p,
                actual: vref.len(),
            });
        }
        Ok(CVector::from_fn(m, |i, _| vref[i % p]))
    }

    /// `(BIBC · x, DLF · x)` for `x` with one row per state, by a backward
    /// sweep summing subtrees and a forward sweep along each path.
    pub fn sweep(&self, x: &CMatrix) -> (CMatrix, CMatrix) {
        let p = self.phase_count;
        let nb = self.parent.len();
        let cols = x.ncols();
        let mut branch = x.clone();
        for pos in (0..nb).rev() {
            if let Some(up) = self.parent[pos] {
                for ph in 0..p {
                    for c in 0..cols {
                        let v = branch[(pos * p + ph, c)];
                        branch[(up * p + ph, c)] += v;
                    }
                }
            }
        }
        let mut drop = CMatrix::from_element(x.nrows(), cols, czero());
        for pos in 0..nb {
            let z = &self.impedances[pos];
            for a in 0..p {
                for c in 0..cols {
                    let mut v = match self.parent[pos] {
                        Some(up) => drop[(up * p + a, c)],
                        None => czero(),
                    };
                    for b in 0..p {
                        v += z[(a, b)] * branch[(pos * p + b, c)];
                    }
                    drop[(pos * p + a, c)] = v;
                }
            }
        }
        (branch, drop)
    }
}

/// Builds BIBC, BCBV and DLF blockwise: identity blocks for every bus
/// downstream of a branch, and each bus accumulating the impedances on its
/// path to the reference bus.
pub fn build_flow_matrices(net: &RadialNetwork) -> FlowMatrices {
    let p = net.phase_count();
    let nb = net.order().len();
    let m = nb * p;
    let mut bibc = CMatrix::from_element(m, m, czero());
    let mut bcbv = CMatrix::from_element(m, m, czero());
    let one = Complex64::new(1.0, 0.0);

    for k in 0..nb {
        for j in k..net.subtree_end(k) {
            for ph in 0..p {
                bibc[(k * p + ph, j * p + ph)] = one;
            }
        }
    }
    for j in 0..nb {
        let mut anc = Some(j);
        while let Some(k) = anc {
            let z = &net.branches()[k].impedance;
            bcbv.view_mut((j * p, k * p), (p, p)).copy_from(z);
            anc = net.parent(k);
        }
    }
    let dlf = &bcbv * &bibc;
    FlowMatrices {
        phase_count: p,
        bibc,
        bcbv,
        dlf,
        parent: (0..nb).map(|k| net.parent(k)).collect(),
        impedances: net.branches().iter().map(|b| b.impedance.clone()).collect(),
    }
}

/// Non-iterative state propagation for given injected currents:
/// `branch = BIBC · i`, `v = v_ref − DLF · i`.
///
/// `vref` holds either one voltage per phase or one per state.
pub fn direct_power_flow(
    fm: &FlowMatrices,
    injections: &CVector,
    vref: &[Complex64],
) -> Result<(CVector, CVector)> {
    let m = fm.state_len();
    if injections.len() != m {
        return Err(DsseError::Dimension {
            context: "injected currents",
            expected: m,
            actual: injections.len(),
        });
    }
    let v0 = fm.expand_reference(vref)?;
    let branch = &fm.bibc * injections;
    let voltages = v0 - &fm.dlf * injections;
    Ok((branch, voltages))
}
