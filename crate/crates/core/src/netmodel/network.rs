use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::{CMatrix, DsseError, Result};

/// Bus identifier as it appears in network files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BusId(pub u32);

impl fmt::Display for BusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bus {
    pub id: BusId,
    pub phase_count: usize,
}

/// A line section. `impedance` is the `phase_count × phase_count` series
/// impedance matrix in ohms; off-diagonals are mutual couplings.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub from: BusId,
    pub to: BusId,
    pub impedance: CMatrix,
}

/// A validated radial (tree) network with a single reference bus.
#[derive(Clone, Debug)]
pub struct RadialNetwork {
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    reference_bus: BusId,
    base_voltage: f64,
    phase_count: usize,
    order: Vec<BusId>,
    parent: Vec<Option<usize>>,
    subtree_end: Vec<usize>,
    position: BTreeMap<BusId, usize>,
}

impl RadialNetwork {
    /// Validates the topology and orients every branch away from the reference bus.
    ///
    /// `base_voltage` is the nominal phase-to-ground voltage in volts; it is
    /// used for per-unit scaling only.
    pub fn new(
        buses: Vec<Bus>,
        branches: Vec<Branch>,
        reference_bus: BusId,
        base_voltage: f64,
    ) -> Result<Self> {
        if buses.is_empty() {
            return Err(DsseError::Structure("network has no buses".into()));
        }
        if !(base_voltage.is_finite() && base_voltage > 0.0) {
            return Err(DsseError::InvalidInput(format!(
                "base voltage must be positive, got {base_voltage}"
            )));
        }
        let phase_count = buses[0].phase_count;
        if phase_count != 1 && phase_count != 3 {
            return Err(DsseError::Structure(format!(
                "bus {} has phase count {phase_count}; only 1 or 3 are supported",
                buses[0].id
            )));
        }
        let mut index = BTreeMap::new();
        for (i, bus) in buses.iter().enumerate() {
            if bus.phase_count != phase_count {
                return Err(DsseError::Structure(format!(
                    "bus {} has {} phases but bus {} has {phase_count}",
                    bus.id, bus.phase_count, buses[0].id
                )));
            }
            if index.insert(bus.id, i).is_some() {
                return Err(DsseError::Structure(format!("duplicate bus id {}", bus.id)));
            }
        }
        if !index.contains_key(&reference_bus) {
            return Err(DsseError::Structure(format!(
                "reference bus {reference_bus} is not in the bus list"
            )));
        }
        if branches.len() + 1 != buses.len() {
            return Err(DsseError::Structure(format!(
                "a radial network with {} buses needs {} branches, got {}",
                buses.len(),
                buses.len() - 1,
                branches.len()
            )));
        }

        let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); buses.len()];
        for (k, br) in branches.iter().enumerate() {
            let (Some(&a), Some(&b)) = (index.get(&br.from), index.get(&br.to)) else {
                return Err(DsseError::Structure(format!(
                    "branch {}->{} references an unknown bus",
                    br.from, br.to
                )));
            };
            if a == b {
                return Err(DsseError::Structure(format!(
                    "branch {}->{} is a self loop",
                    br.from, br.to
                )));
            }
            check_impedance(br, phase_count)?;
            adjacency[a].push((b, k));
            adjacency[b].push((a, k));
        }

        // Depth-first preorder from the reference bus; children in listing order.
        let root = index[&reference_bus];
        let mut order: Vec<BusId> = Vec::with_capacity(buses.len() - 1);
        let mut parent: Vec<Option<usize>> = Vec::with_capacity(buses.len() - 1);
        let mut oriented: Vec<Branch> = Vec::with_capacity(branches.len());
        let mut visited = vec![false; buses.len()];
        visited[root] = true;
        let mut used_branch = vec![false; branches.len()];
        let mut stack: Vec<(usize, Option<usize>, usize)> = Vec::new();
        for &(v, k) in adjacency[root].iter().rev() {
            stack.push((v, None, k));
        }
        while let Some((v, upos, k)) = stack.pop() {
            if used_branch[k] {
                continue;
            }
            used_branch[k] = true;
            if visited[v] {
                return Err(DsseError::Structure(format!(
                    "branch {}->{} closes a loop; the network is not radial",
                    branches[k].from, branches[k].to
                )));
            }
            visited[v] = true;
            let pos = order.len();
            order.push(buses[v].id);
            parent.push(upos);
            let upstream_id = match upos {
                Some(p) => order[p],
                None => reference_bus,
            };
            oriented.push(Branch {
                from: upstream_id,
                to: buses[v].id,
                impedance: branches[k].impedance.clone(),
            });
            for &(w, kk) in adjacency[v].iter().rev() {
                if !used_branch[kk] {
                    stack.push((w, Some(pos), kk));
                }
            }
        }
        if let Some(i) = visited.iter().position(|&seen| !seen) {
            return Err(DsseError::Structure(format!(
                "bus {} is not connected to reference bus {reference_bus}",
                buses[i].id
            )));
        }

        let n = order.len();
        let mut subtree_end: Vec<usize> = (1..=n).collect();
        for pos in (0..n).rev() {
            if let Some(p) = parent[pos] {
                subtree_end[p] = subtree_end[p].max(subtree_end[pos]);
            }
        }
        let position = order.iter().enumerate().map(|(i, &id)| (id, i)).collect();

        Ok(Self {
            buses,
            branches: oriented,
            reference_bus,
            base_voltage,
            phase_count,
            order,
            parent,
            subtree_end,
            position,
        })
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    /// Branches oriented away from the reference bus; branch `k` feeds the bus at position `k`.
    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn reference_bus(&self) -> BusId {
        self.reference_bus
    }

    pub fn base_voltage(&self) -> f64 {
        self.base_voltage
    }

    pub fn phase_count(&self) -> usize {
        self.phase_count
    }

    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    /// Non-reference buses in state order.
    pub fn order(&self) -> &[BusId] {
        &self.order
    }

    /// Position of a non-reference bus in state order.
    pub fn position(&self, bus: BusId) -> Option<usize> {
        self.position.get(&bus).copied()
    }

    /// Position of the upstream bus, `None` when it is the reference bus.
    pub fn parent(&self, pos: usize) -> Option<usize> {
        self.parent[pos]
    }

    /// Positions `pos..subtree_end(pos)` are exactly the buses downstream of `pos` (inclusive).
    pub fn subtree_end(&self, pos: usize) -> usize {
        self.subtree_end[pos]
    }

    /// Length of a stacked per-step state vector, `phase_count · (n − 1)`.
    pub fn state_len(&self) -> usize {
        self.order.len() * self.phase_count
    }

    pub fn state_index(&self, bus: BusId, phase: usize) -> Option<usize> {
        if phase >= self.phase_count {
            return None;
        }
        self.position(bus).map(|p| p * self.phase_count + phase)
    }

    /// Same topology with new branch impedances, given in [`branches`](Self::branches) order.
    pub fn with_impedances(&self, impedances: Vec<CMatrix>) -> Result<Self> {
        if impedances.len() != self.branches.len() {
            return Err(DsseError::Dimension {
                context: "branch impedances",
                expected: self.branches.len(),
                actual: impedances.len(),
            });
        }
        let branches = self
            .branches
            .iter()
            .zip(impedances)
            .map(|(b, z)| Branch {
                from: b.from,
                to: b.to,
                impedance: z,
            })
            .collect();
        Self::new(self.buses.clone(), branches, self.reference_bus, self.base_voltage)
    }
}

fn check_impedance(br: &Branch, p: usize) -> Result<()> {
    let z = &br.impedance;
    if z.nrows() != p || z.ncols() != p {
        return Err(DsseError::Structure(format!(
            "branch {}->{} impedance is {}x{}, expected {p}x{p}",
            br.from,
            br.to,
            z.nrows(),
            z.ncols()
        )));
    }
    if z.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(DsseError::Structure(format!(
            "branch {}->{} impedance is not finite",
            br.from, br.to
        )));
    }
    for i in 0..p {
        if z[(i, i)].norm() == 0.0 {
            return Err(DsseError::Structure(format!(
                "branch {}->{} has zero self impedance on phase {i}",
                br.from, br.to
            )));
        }
    }
    if !crate::linalg::is_complex_symmetric(z, 1e-9) {
        return Err(DsseError::Structure(format!(
            "branch {}->{} impedance matrix is not symmetric",
            br.from, br.to
        )));
    }
    Ok(())
}
