#![allow(dead_code)]

use dsse_core::netmodel::{Branch, Bus, BusId, RadialNetwork};
use dsse_core::{CMatrix, CVector, Complex64};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn scalar(z: Complex64) -> CMatrix {
    CMatrix::from_element(1, 1, z)
}

pub fn bus(id: u32, phases: usize) -> Bus {
    Bus {
        id: BusId(id),
        phase_count: phases,
    }
}

pub fn branch(from: u32, to: u32, z: CMatrix) -> Branch {
    Branch {
        from: BusId(from),
        to: BusId(to),
        impedance: z,
    }
}

/// Area currents at full loading, areas 1 to 5.
pub const TABLE1: [(f64, f64); 5] = [(18.9, -6.7), (13.4, -12.7), (14.8, -10.9), (16.8, -14.9), (17.7, -14.9)];

pub fn table1() -> Vec<Complex64> {
    TABLE1.iter().map(|&(re, im)| c(re, im)).collect()
}

/// Reference bus 1, areas on buses 2 to 6.
pub fn six_bus() -> RadialNetwork {
    let z = |r, x| scalar(c(r, x));
    RadialNetwork::new(
        (1..=6).map(|i| bus(i, 1)).collect(),
        vec![
            branch(1, 2, z(0.12, 0.08)),
            branch(2, 3, z(0.25, 0.12)),
            branch(3, 4, z(0.3, 0.14)),
            branch(2, 5, z(0.25, 0.12)),
            branch(5, 6, z(0.3, 0.14)),
        ],
        BusId(1),
        230.0,
    )
    .unwrap()
}

/// Injection vector of the six-bus network in state order.
pub fn six_bus_injections(net: &RadialNetwork, area_currents: &[Complex64]) -> CVector {
    let mut i = CVector::zeros(net.state_len());
    for (a, &cur) in area_currents.iter().enumerate() {
        let s = net.state_index(BusId(a as u32 + 2), 0).unwrap();
        i[s] = cur;
    }
    i
}

pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_impedance(rng: &mut ChaCha8Rng, phases: usize) -> CMatrix {
    let mut z = CMatrix::zeros(phases, phases);
    for i in 0..phases {
        z[(i, i)] = c(rng.random_range(0.05..0.6), rng.random_range(0.02..0.5));
        for j in 0..i {
            let m = c(rng.random_range(0.0..0.03), rng.random_range(0.0..0.1));
            z[(i, j)] = m;
            z[(j, i)] = m;
        }
    }
    z
}

/// Random tree on `n` buses with shuffled ids; bus ids are `10 + k`.
pub fn random_tree(rng: &mut ChaCha8Rng, n: usize, phases: usize) -> RadialNetwork {
    let ids: Vec<u32> = (0..n as u32).map(|k| 10 + k * 3).collect();
    let mut branches = Vec::new();
    for k in 1..n {
        let parent = rng.random_range(0..k);
        let (a, b) = if rng.random_bool(0.5) { (ids[parent], ids[k]) } else { (ids[k], ids[parent]) };
        branches.push(branch(a, b, random_impedance(rng, phases)));
    }
    let buses = ids.iter().map(|&id| bus(id, phases)).collect();
    RadialNetwork::new(buses, branches, BusId(ids[0]), 230.0).unwrap()
}

pub fn random_currents(rng: &mut ChaCha8Rng, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| c(rng.random_range(0.0..30.0), rng.random_range(-20.0..5.0)))
}

pub fn max_rel_diff(a: &CVector, b: &CVector) -> f64 {
    let scale = b.iter().map(|z| z.norm()).fold(1e-300, f64::max);
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max) / scale
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_real(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

/// Random real composite covariance `A Aᵀ` of size `2n`, returned as `(Γ, C)`.
/// `rank` below `2n` gives a singular covariance.
pub fn random_improper(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> (CVector, CMatrix, CMatrix) {
    let a = DMatrix::from_fn(2 * n, rank, |_, _| gauss(rng));
    let k = &a * a.transpose();
    let (gamma, cc) = complex_pair(&k);
    let mean = CVector::from_fn(n, |_, _| c(gauss(rng), gauss(rng)));
    (mean, gamma, cc)
}

/// `(Γ, C)` from a real composite covariance, written out independently of the library.
pub fn complex_pair(k: &DMatrix<f64>) -> (CMatrix, CMatrix) {
    let n = k.nrows() / 2;
    let rr = |i, j| k[(i, j)];
    let ri = |i, j| k[(i, n + j)];
    let ir = |i, j| k[(n + i, j)];
    let ii = |i, j| k[(n + i, n + j)];
    let gamma = CMatrix::from_fn(n, n, |i, j| c(rr(i, j) + ii(i, j), ir(i, j) - ri(i, j)));
    let cc = CMatrix::from_fn(n, n, |i, j| c(rr(i, j) - ii(i, j), ir(i, j) + ri(i, j)));
    (gamma, cc)
}

/// Real composite covariance `[[K_rr, K_ri], [K_ir, K_ii]]` from `(Γ, C)`.
pub fn composite_of(gamma: &CMatrix, cc: &CMatrix) -> DMatrix<f64> {
    let n = gamma.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let (a, b) = (i % n, j % n);
        let (g, p) = (gamma[(a, b)], cc[(a, b)]);
        match (i < n, j < n) {
            (true, true) => 0.5 * (g.re + p.re),
            (false, false) => 0.5 * (g.re - p.re),
            (false, true) => 0.5 * (g.im + p.im),
            (true, false) => 0.5 * (p.im - g.im),
        }
    })
}

/// Posterior of the unmeasured block by conditioning the real composite
/// Gaussian with a dense inverse. Returns `(mean, Γ', C')`.
pub fn oracle_condition(
    mean: &CVector,
    gamma: &CMatrix,
    cc: &CMatrix,
    measured: &[usize],
    observed: &CVector,
) -> (CVector, CMatrix, CMatrix) {
    let n = mean.len();
    let unmeasured: Vec<usize> = (0..n).filter(|i| !measured.contains(i)).collect();
    let k = composite_of(gamma, cc);
    let lift = |idx: &[usize]| -> Vec<usize> { idx.iter().copied().chain(idx.iter().map(|i| i + n)).collect() };
    let (mi, ui) = (lift(measured), lift(&unmeasured));
    let sub = |r: &[usize], cidx: &[usize]| DMatrix::from_fn(r.len(), cidx.len(), |i, j| k[(r[i], cidx[j])]);
    let kmm_inv = sub(&mi, &mi).try_inverse().unwrap();
    let kum = sub(&ui, &mi);
    let kuu = sub(&ui, &ui);
    let km = measured.len();
    let d = DMatrix::from_fn(2 * km, 1, |i, _| {
        let z = observed[i % km] - mean[measured[i % km]];
        if i < km { z.re } else { z.im }
    });
    let shift = &kum * &kmm_inv * d;
    let cov = &kuu - &kum * &kmm_inv * kum.transpose();
    let u = unmeasured.len();
    let post_mean = CVector::from_fn(u, |i, _| mean[unmeasured[i]] + c(shift[(i, 0)], shift[(u + i, 0)]));
    let (g, p) = complex_pair(&cov);
    (post_mean, g, p)
}

use dsse_core::estimator::{Measurement, MeasurementStep, StateKind, Target};

/// Pseudo injections for every state plus the reference voltage.
pub fn pseudo_step(net: &RadialNetwork, pseudo: &CVector, eps: f64, vref: Complex64, vref_eps: f64) -> MeasurementStep {
    let p = net.phase_count();
    let mut step = MeasurementStep::new(vec![vref; p], vref_eps);
    for (s, &v) in pseudo.iter().enumerate() {
        step.push(Measurement::pseudo(net.order()[s / p], s % p, v, eps));
    }
    step
}

pub fn real(kind: StateKind, bus: u32, phase: usize, value: Complex64, eps: f64) -> Measurement {
    Measurement::real(Target::new(kind, BusId(bus), phase), value, eps)
}
