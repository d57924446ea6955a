//! Bundled case-study feeders with nominal loads and meter placements.
//!
//! None of these carry published impedances for the original studies; the
//! six-bus and LV feeders are synthetic and the 123-node feeder follows the
//! public IEEE line list with a single balanced line code.

use dsse_core::estimator::{StateKind, Target};
use dsse_core::netmodel::{Branch, Bus, BusId, RadialNetwork};
use dsse_core::{CMatrix, CVector, Complex64};

use crate::error::{Context, HarnessError, Result};
use crate::generator::LoadType;

/// Nominal (100 % loading) current drawn at one bus phase.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Load {
    pub bus: BusId,
    pub phase: usize,
    /// Amperes, positive for load draw.
    pub current: Complex64,
    pub load_type: LoadType,
}

#[derive(Clone, Debug)]
pub struct CaseStudy {
    pub name: String,
    pub network: RadialNetwork,
    pub loads: Vec<Load>,
    /// Meters of the base scenario.
    pub meters: Vec<Target>,
    /// Meters added in the extra-measurement scenario.
    pub extra_meters: Vec<Target>,
}

impl CaseStudy {
    /// Nominal injections in state order, zero at unloaded states.
    pub fn nominal_injections(&self) -> Result<CVector> {
        let mut out = CVector::zeros(self.network.state_len());
        for load in &self.loads {
            out[self.state_of(load)?] += load.current;
        }
        Ok(out)
    }

    pub fn state_of(&self, load: &Load) -> Result<usize> {
        self.network.state_index(load.bus, load.phase).ok_or_else(|| {
            HarnessError::Input(format!(
                "load at bus {} phase {} is not a state of {}",
                load.bus, load.phase, self.name
            ))
        })
    }

    /// Load type of every state; `None` where nothing is connected.
    pub fn state_types(&self) -> Result<Vec<Option<LoadType>>> {
        let mut out = vec![None; self.network.state_len()];
        for load in &self.loads {
            out[self.state_of(load)?] = Some(load.load_type);
        }
        Ok(out)
    }

    /// Reference voltage per phase: nominal magnitude, phases 120° apart.
    pub fn reference_voltage(&self) -> Vec<Complex64> {
        let v = self.network.base_voltage();
        (0..self.network.phase_count())
            .map(|k| Complex64::from_polar(v, -(k as f64) * 2.0 * std::f64::consts::PI / 3.0))
            .collect()
    }
}

pub const BUNDLED: [&str; 4] = ["six-bus", "ieee123", "ieee615", "lv23"];

pub fn bundled(name: &str) -> Result<CaseStudy> {
    match name {
        "six-bus" => six_bus(),
        "ieee123" => ieee123(),
        "ieee615" => ieee615(),
        "lv23" => lv23(),
        other => Err(HarnessError::Input(format!(
            "unknown bundled network {other:?}; available: {}",
            BUNDLED.join(", ")
        ))),
    }
}

fn scalar(r: f64, x: f64) -> CMatrix {
    CMatrix::from_element(1, 1, Complex64::new(r, x))
}

fn single_phase(edges: &[(u32, u32, CMatrix)], reference: u32, base_voltage: f64) -> Result<RadialNetwork> {
    let mut ids: Vec<u32> = edges.iter().flat_map(|(a, b, _)| [*a, *b]).collect();
    ids.sort_unstable();
    ids.dedup();
    let buses = ids
        .into_iter()
        .map(|id| Bus {
            id: BusId(id),
            phase_count: 1,
        })
        .collect();
    let branches = edges
        .iter()
        .map(|(a, b, z)| Branch {
            from: BusId(*a),
            to: BusId(*b),
            impedance: z.clone(),
        })
        .collect();
    RadialNetwork::new(buses, branches, BusId(reference), base_voltage).context(|| "bundled network".into())
}

fn injection(bus: u32, phase: usize) -> Target {
    Target::new(StateKind::InjectedCurrent, BusId(bus), phase)
}

/// Area currents at full loading for areas 1 to 5.
pub const SIX_BUS_CURRENTS: [(f64, f64); 5] =
    [(18.9, -6.7), (13.4, -12.7), (14.8, -10.9), (16.8, -14.9), (17.7, -14.9)];

/// Six-bus MV feeder: reference bus 1 and areas 1 to 5 on buses 2 to 6.
/// Areas 1, 2 and 4 are residential, 3 and 5 industrial. The residential
/// areas share one long feeder; the industrial areas sit on a short cable
/// close to the substation.
pub fn six_bus() -> Result<CaseStudy> {
    let edges = [
        (1, 2, scalar(12.0, 9.0)),
        (2, 3, scalar(14.0, 10.0)),
        (3, 5, scalar(16.0, 11.0)),
        (1, 4, scalar(5.0, 3.75)),
        (4, 6, scalar(2.0, 1.5)),
    ];
    let network = single_phase(&edges, 1, 6350.0)?;
    let types = [
        LoadType::Residential,
        LoadType::Residential,
        LoadType::Industrial,
        LoadType::Residential,
        LoadType::Industrial,
    ];
    let loads = SIX_BUS_CURRENTS
        .iter()
        .zip(types)
        .enumerate()
        .map(|(a, (&(re, im), load_type))| Load {
            bus: BusId(a as u32 + 2),
            phase: 0,
            current: Complex64::new(re, im),
            load_type,
        })
        .collect();
    Ok(CaseStudy {
        name: "six-bus".into(),
        network,
        loads,
        meters: vec![injection(2, 0)],
        extra_meters: vec![injection(4, 0)],
    })
}

/// Line sections of the IEEE 123-node feeder as (from, to, feet). Switches
/// and regulators are short sections; normally open ties are left out.
const IEEE123_LINES: &[(u32, u32, f64)] = &[
    (150, 149, 10.0),
    (149, 1, 400.0),
    (1, 2, 175.0),
    (1, 3, 250.0),
    (1, 7, 300.0),
    (3, 4, 200.0),
    (3, 5, 325.0),
    (5, 6, 250.0),
    (7, 8, 200.0),
    (8, 12, 225.0),
    (8, 9, 225.0),
    (8, 13, 300.0),
    (9, 14, 425.0),
    (13, 34, 150.0),
    (13, 18, 825.0),
    (13, 152, 10.0),
    (14, 11, 250.0),
    (14, 10, 250.0),
    (15, 16, 375.0),
    (15, 17, 350.0),
    (18, 19, 250.0),
    (18, 21, 300.0),
    (18, 135, 10.0),
    (19, 20, 325.0),
    (21, 22, 525.0),
    (21, 23, 250.0),
    (23, 24, 550.0),
    (23, 25, 275.0),
    (25, 26, 350.0),
    (25, 28, 200.0),
    (26, 27, 275.0),
    (26, 31, 225.0),
    (27, 33, 500.0),
    (28, 29, 300.0),
    (29, 30, 350.0),
    (30, 250, 200.0),
    (31, 32, 300.0),
    (34, 15, 100.0),
    (35, 36, 650.0),
    (35, 40, 250.0),
    (36, 37, 300.0),
    (36, 38, 250.0),
    (38, 39, 325.0),
    (40, 41, 325.0),
    (40, 42, 250.0),
    (42, 43, 500.0),
    (42, 44, 200.0),
    (44, 45, 200.0),
    (44, 47, 250.0),
    (45, 46, 300.0),
    (47, 48, 150.0),
    (47, 49, 250.0),
    (49, 50, 250.0),
    (50, 51, 250.0),
    (51, 151, 500.0),
    (52, 53, 200.0),
    (53, 54, 125.0),
    (54, 55, 275.0),
    (54, 57, 350.0),
    (55, 56, 275.0),
    (57, 58, 250.0),
    (57, 60, 750.0),
    (58, 59, 250.0),
    (60, 61, 550.0),
    (60, 62, 250.0),
    (60, 160, 10.0),
    (61, 610, 10.0),
    (62, 63, 175.0),
    (63, 64, 350.0),
    (64, 65, 425.0),
    (65, 66, 325.0),
    (67, 68, 200.0),
    (67, 72, 275.0),
    (67, 97, 250.0),
    (68, 69, 275.0),
    (69, 70, 325.0),
    (70, 71, 275.0),
    (72, 73, 275.0),
    (72, 76, 200.0),
    (73, 74, 350.0),
    (74, 75, 400.0),
    (76, 77, 400.0),
    (76, 86, 700.0),
    (77, 78, 100.0),
    (78, 79, 225.0),
    (78, 80, 475.0),
    (80, 81, 475.0),
    (81, 82, 250.0),
    (81, 84, 675.0),
    (82, 83, 250.0),
    (84, 85, 475.0),
    (86, 87, 450.0),
    (87, 88, 175.0),
    (87, 89, 275.0),
    (89, 90, 225.0),
    (89, 91, 225.0),
    (91, 92, 300.0),
    (91, 93, 225.0),
    (93, 94, 275.0),
    (93, 95, 300.0),
    (95, 96, 200.0),
    (97, 98, 275.0),
    (97, 197, 10.0),
    (98, 99, 550.0),
    (99, 100, 300.0),
    (100, 450, 800.0),
    (101, 102, 225.0),
    (101, 105, 275.0),
    (102, 103, 325.0),
    (103, 104, 700.0),
    (105, 106, 225.0),
    (105, 108, 325.0),
    (106, 107, 575.0),
    (108, 109, 450.0),
    (108, 300, 1000.0),
    (109, 110, 300.0),
    (110, 111, 575.0),
    (110, 112, 125.0),
    (112, 113, 525.0),
    (113, 114, 325.0),
    (135, 35, 375.0),
    (152, 52, 400.0),
    (160, 67, 350.0),
    (197, 101, 250.0),
];

/// Spot loads as (bus, kW, kvar), summed over phases.
const IEEE123_LOADS: &[(u32, f64, f64)] = &[
    (1, 40.0, 20.0),
    (2, 20.0, 10.0),
    (4, 40.0, 20.0),
    (5, 20.0, 10.0),
    (6, 40.0, 20.0),
    (7, 20.0, 10.0),
    (9, 40.0, 20.0),
    (10, 20.0, 10.0),
    (11, 40.0, 20.0),
    (12, 20.0, 10.0),
    (16, 40.0, 20.0),
    (17, 20.0, 10.0),
    (19, 40.0, 20.0),
    (20, 40.0, 20.0),
    (22, 40.0, 20.0),
    (24, 40.0, 20.0),
    (28, 40.0, 20.0),
    (29, 40.0, 20.0),
    (30, 40.0, 20.0),
    (31, 20.0, 10.0),
    (32, 20.0, 10.0),
    (33, 40.0, 20.0),
    (34, 40.0, 20.0),
    (35, 40.0, 20.0),
    (37, 40.0, 20.0),
    (38, 20.0, 10.0),
    (39, 20.0, 10.0),
    (41, 20.0, 10.0),
    (42, 20.0, 10.0),
    (43, 40.0, 20.0),
    (45, 20.0, 10.0),
    (46, 20.0, 10.0),
    (47, 105.0, 75.0),
    (48, 210.0, 150.0),
    (49, 140.0, 95.0),
    (50, 40.0, 20.0),
    (51, 20.0, 10.0),
    (52, 40.0, 20.0),
    (53, 40.0, 20.0),
    (55, 20.0, 10.0),
    (56, 20.0, 10.0),
    (58, 20.0, 10.0),
    (59, 20.0, 10.0),
    (60, 20.0, 10.0),
    (62, 40.0, 20.0),
    (63, 40.0, 20.0),
    (64, 75.0, 35.0),
    (65, 140.0, 100.0),
    (66, 75.0, 35.0),
    (68, 20.0, 10.0),
    (69, 40.0, 20.0),
    (70, 20.0, 10.0),
    (71, 40.0, 20.0),
    (73, 40.0, 20.0),
    (74, 40.0, 20.0),
    (75, 40.0, 20.0),
    (76, 245.0, 180.0),
    (77, 40.0, 20.0),
    (79, 40.0, 20.0),
    (80, 40.0, 20.0),
    (82, 40.0, 20.0),
    (83, 20.0, 10.0),
    (84, 20.0, 10.0),
    (85, 40.0, 20.0),
    (86, 20.0, 10.0),
    (87, 40.0, 20.0),
    (88, 40.0, 20.0),
    (90, 40.0, 20.0),
    (92, 40.0, 20.0),
    (94, 40.0, 20.0),
    (95, 20.0, 10.0),
    (96, 20.0, 10.0),
    (98, 40.0, 20.0),
    (99, 40.0, 20.0),
    (100, 40.0, 20.0),
    (102, 20.0, 10.0),
    (103, 40.0, 20.0),
    (104, 40.0, 20.0),
    (106, 40.0, 20.0),
    (107, 40.0, 20.0),
    (109, 40.0, 20.0),
    (111, 20.0, 10.0),
    (112, 20.0, 10.0),
    (113, 40.0, 20.0),
    (114, 20.0, 10.0),
];

/// Industrial regions of the 123-node case, inclusive bus ranges.
const IEEE123_INDUSTRIAL: [(u32, u32); 3] = [(24, 33), (76, 86), (105, 114)];

const IEEE123_PHASE_VOLTAGE: f64 = 2401.8;
const OHM_PER_MILE: (f64, f64) = (0.306, 0.627);

fn ieee123_parts(offset: u32) -> (Vec<(u32, u32, CMatrix)>, Vec<Load>) {
    let edges = IEEE123_LINES
        .iter()
        .map(|&(a, b, feet)| {
            let miles = feet / 5280.0;
            (a + offset, b + offset, scalar(OHM_PER_MILE.0 * miles, OHM_PER_MILE.1 * miles))
        })
        .collect();
    let loads = IEEE123_LOADS
        .iter()
        .map(|&(bus, kw, kvar)| {
            let industrial = IEEE123_INDUSTRIAL.iter().any(|&(lo, hi)| (lo..=hi).contains(&bus));
            // Balanced per-phase equivalent of the three-phase total.
            let s = Complex64::new(kw, kvar) * (1000.0 / 3.0);
            Load {
                bus: BusId(bus + offset),
                phase: 0,
                current: s.conj() / IEEE123_PHASE_VOLTAGE,
                load_type: if industrial {
                    LoadType::Industrial
                } else {
                    LoadType::Residential
                },
            }
        })
        .collect();
    (edges, loads)
}

/// Balanced single-phase equivalent of the IEEE 123-node feeder, rooted at 150.
/// Meters on residential buses 2, 48, 69 and industrial buses 28, 77, 109.
pub fn ieee123() -> Result<CaseStudy> {
    let (edges, loads) = ieee123_parts(0);
    Ok(CaseStudy {
        name: "ieee123".into(),
        network: single_phase(&edges, 150, IEEE123_PHASE_VOLTAGE)?,
        loads,
        meters: [2, 48, 69, 28, 77, 109].iter().map(|&b| injection(b, 0)).collect(),
        extra_meters: Vec::new(),
    })
}

/// Five copies of the 123-node feeder in parallel behind a common source bus 0.
/// Copy `k` (1 to 5) adds `1000·k` to every bus id.
pub fn ieee615() -> Result<CaseStudy> {
    let mut edges = Vec::new();
    let mut loads = Vec::new();
    let mut meters = Vec::new();
    for k in 1..=5u32 {
        let offset = 1000 * k;
        let (e, l) = ieee123_parts(offset);
        edges.push((0, 150 + offset, scalar(0.001, 0.002)));
        edges.extend(e);
        loads.extend(l);
        meters.extend([2, 48, 69, 28, 77, 109].iter().map(|&b| injection(b + offset, 0)));
    }
    Ok(CaseStudy {
        name: "ieee615".into(),
        network: single_phase(&edges, 0, IEEE123_PHASE_VOLTAGE)?,
        loads,
        meters,
        extra_meters: Vec::new(),
    })
}

/// LV cable per km: self and mutual impedance in ohms.
const LV_SELF: (f64, f64) = (0.32, 0.30);
const LV_MUTUAL: (f64, f64) = (0.05, 0.12);

fn lv_cable(metres: f64) -> CMatrix {
    let km = metres / 1000.0;
    CMatrix::from_fn(3, 3, |i, j| {
        let (r, x) = if i == j { LV_SELF } else { LV_MUTUAL };
        Complex64::new(r * km, x * km)
    })
}

/// Customers connected to each bus of the LV feeder, per phase.
const LV_CUSTOMERS: [[u32; 3]; 22] = [
    [4, 3, 5],
    [3, 5, 2],
    [5, 2, 4],
    [2, 4, 3],
    [4, 4, 2],
    [3, 2, 5],
    [2, 5, 3],
    [5, 3, 3],
    [3, 4, 2],
    [4, 2, 4],
    [2, 3, 5],
    [3, 5, 2],
    [5, 2, 3],
    [2, 4, 4],
    [4, 3, 2],
    [3, 2, 4],
    [2, 4, 3],
    [4, 5, 2],
    [3, 2, 2],
    [2, 3, 4],
    [4, 2, 3],
    [3, 4, 5],
];

/// Three-phase unbalanced LV feeder with 23 buses, reference bus 0. A trunk
/// runs from bus 0 to bus 8, which feeds three laterals with 14 buses. Meters
/// on every phase of buses 1 and 10.
pub fn lv23() -> Result<CaseStudy> {
    let mut edges: Vec<(u32, u32, f64)> = (0..8).map(|k| (k, k + 1, 40.0)).collect();
    edges.extend([(8, 9, 35.0), (9, 10, 35.0), (10, 11, 30.0), (11, 12, 30.0), (12, 13, 30.0)]);
    edges.extend([(8, 14, 35.0), (14, 15, 35.0), (15, 16, 30.0), (16, 17, 30.0)]);
    edges.extend([(8, 18, 35.0), (18, 19, 35.0), (19, 20, 30.0), (20, 21, 30.0), (21, 22, 30.0)]);
    let buses = (0..23)
        .map(|id| Bus {
            id: BusId(id),
            phase_count: 3,
        })
        .collect();
    let branches = edges
        .iter()
        .map(|&(a, b, m)| Branch {
            from: BusId(a),
            to: BusId(b),
            impedance: lv_cable(m),
        })
        .collect();
    let base = 230.0;
    let network = RadialNetwork::new(buses, branches, BusId(0), base).context(|| "bundled network".into())?;
    let kw_per_customer = 1.5;
    let tan_phi = 0.95f64.acos().tan();
    let mut loads = Vec::new();
    for (k, counts) in LV_CUSTOMERS.iter().enumerate() {
        for (phase, &n) in counts.iter().enumerate() {
            let p = n as f64 * kw_per_customer * 1000.0;
            let s = Complex64::new(p, p * tan_phi);
            let v = Complex64::from_polar(base, -(phase as f64) * 2.0 * std::f64::consts::PI / 3.0);
            loads.push(Load {
                bus: BusId(k as u32 + 1),
                phase,
                current: (s / v).conj(),
                load_type: LoadType::Residential,
            });
        }
    }
    let meters = [1, 10]
        .iter()
        .flat_map(|&b| (0..3).map(move |ph| injection(b, ph)))
        .collect();
    Ok(CaseStudy {
        name: "lv23".into(),
        network,
        loads,
        meters,
        extra_meters: Vec::new(),
    })
}
