mod common;

use common::*;
use dsse_core::complexstats::{ComplexGaussian, CorrelationMatrix};
use dsse_core::estimator::{
    build_prior, composite_block, ibv_transform, latent_prior, polar_variance, propagate_states,
    pseudo_currents_from_power, quality_from_trace, reference_prior, state_polar_variance, AngleReference,
    Estimator, EstimatorConfig, MeasurementSet, Mode, QualityScope, StateKind,
};
use dsse_core::netmodel::{build_flow_matrices, direct_power_flow, BusId, RadialNetwork};
use dsse_core::{CMatrix, CVector, Complex64, DsseError};
use nalgebra::{DMatrix, Matrix2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const VREF: Complex64 = Complex64::new(230.0, 0.0);

fn table1_step(net: &RadialNetwork, eps: f64) -> dsse_core::estimator::MeasurementStep {
    pseudo_step(net, &six_bus_injections(net, &table1()), eps, VREF, 3.0)
}

/// Correlation among the five areas, constant over lags, positive definite.
fn area_correlation(nt: usize, rho: f64) -> CorrelationMatrix {
    let n = 5;
    let d = 2 * n * nt;
    let m = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            1.0
        } else {
            let same_quadrant = (i < n * nt) == (j < n * nt);
            let lag = ((i % (n * nt)) / n).abs_diff((j % (n * nt)) / n) as i32;
            let base = if same_quadrant { rho } else { 0.3 * rho };
            base * 0.9_f64.powi(lag)
        }
    });
    CorrelationMatrix::new(nt, n, m).unwrap()
}

#[test]
fn certain_prior_has_zero_covariance() {
    let net = six_bus();
    let prior = build_prior(&net, &[table1_step(&net, 0.0)], &CorrelationMatrix::identity(5, 1)).unwrap();
    assert!(max_abs(prior.gamma()) == 0.0 && max_abs(prior.c()) == 0.0);
}

#[test]
fn identity_correlation_gives_diagonal_composite() {
    let net = six_bus();
    let step = table1_step(&net, 50.0);
    let prior = build_prior(&net, &[step], &CorrelationMatrix::identity(5, 1)).unwrap();
    let k = prior.composite_covariance();
    let inj = six_bus_injections(&net, &table1());
    for i in 0..10 {
        for j in 0..10 {
            if i != j {
                assert_eq!(k[(i, j)], 0.0);
            }
        }
        let x = inj[i % 5];
        let sd = if i < 5 { x.re } else { x.im } * 50.0 / 300.0;
        assert!((k[(i, i)] - sd * sd).abs() < 1e-12);
    }
}

#[test]
fn windowed_prior_dimension() {
    let net = six_bus();
    let window = vec![table1_step(&net, 50.0); 3];
    let prior = build_prior(&net, &window, &area_correlation(3, 0.8)).unwrap();
    assert_eq!(prior.dim(), 15);
    assert_eq!(prior.gamma().shape(), (15, 15));
}

#[test]
fn missing_pseudo_value_is_an_observability_error() {
    let net = six_bus();
    let mut step = table1_step(&net, 50.0);
    step.measurements.remove(2);
    let err = build_prior(&net, &[step], &CorrelationMatrix::identity(5, 1)).unwrap_err();
    assert!(matches!(err, DsseError::NotObservable(ref msg) if msg.contains("bus 4")), "{err}");
}

#[test]
fn zero_injections_propagate_the_reference() {
    let net = six_bus();
    let fm = build_flow_matrices(&net);
    let inj = ComplexGaussian::new(CVector::zeros(5), CMatrix::zeros(5, 5), CMatrix::zeros(5, 5)).unwrap();
    let step = pseudo_step(&net, &CVector::zeros(5), 0.0, VREF, 3.0);
    let vr = reference_prior(&[step]).unwrap();
    let latent = latent_prior(&inj, &vr).unwrap();
    let est = propagate_states(&latent, &fm, 1, Mode::Cs, 230.0, QualityScope::BusVoltages).unwrap();
    let sd = 230.0 * 0.01;
    for s in 0..5 {
        assert_eq!(est.voltages(0)[s], VREF);
        let i = est.index(StateKind::BusVoltage, 0, s);
        assert!((est.gamma_diag[i] - sd * sd).abs() < 1e-9);
        assert!((est.c_diag[i].re - sd * sd).abs() < 1e-9);
        assert_eq!(est.branch_currents(0)[s].norm(), 0.0);
    }
}

#[test]
fn three_bus_chain_by_hand() {
    let net = RadialNetwork::new(
        vec![bus(0, 1), bus(1, 1), bus(2, 1)],
        vec![branch(0, 1, scalar(c(1.0, 1.0))), branch(1, 2, scalar(c(2.0, 0.0)))],
        BusId(0),
        100.0,
    )
    .unwrap();
    let fm = build_flow_matrices(&net);
    // independent injections with variance 1 (real part only) and 4 (imaginary only)
    let mean = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]);
    let g = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0, 0.0), c(4.0, 0.0)]));
    let p = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0, 0.0), c(-4.0, 0.0)]));
    let inj = ComplexGaussian::new(mean, g, p).unwrap();
    let vr = ComplexGaussian::new(CVector::from_element(1, c(100.0, 0.0)), CMatrix::zeros(1, 1), CMatrix::zeros(1, 1)).unwrap();
    let est = propagate_states(&latent_prior(&inj, &vr).unwrap(), &fm, 1, Mode::Cs, 100.0, QualityScope::BusVoltages).unwrap();

    // branch 1 carries i1 + i2 = 1 + j, branch 2 carries i2 = j
    assert_eq!(est.branch_currents(0), CVector::from_vec(vec![c(1.0, 1.0), c(0.0, 1.0)]));
    // v1 = 100 − (1+j)(1+j) = 100 − 2j; v2 = v1 − 2·j = 100 − 4j
    let v = est.voltages(0);
    assert!((v[0] - c(100.0, -2.0)).norm() < 1e-12);
    assert!((v[1] - c(100.0, -4.0)).norm() < 1e-12);
    // var(v1) = |1+j|²·(1 + 4) = 10; var(v2) = |1+j|²·1 + |3+j|²·4 = 2 + 40
    assert!((est.gamma_diag[est.index(StateKind::BusVoltage, 0, 0)] - 10.0).abs() < 1e-12);
    assert!((est.gamma_diag[est.index(StateKind::BusVoltage, 0, 1)] - 42.0).abs() < 1e-12);
    // pseudo-covariance of v2: (1+j)²·1 + (3+j)²·(−4) = 2j − 4(8 + 6j)
    let cv2 = est.c_diag[est.index(StateKind::BusVoltage, 0, 1)];
    assert!((cv2 - c(-32.0, -22.0)).norm() < 1e-12);
    assert!((est.gamma_diag[est.index(StateKind::BranchCurrent, 0, 0)] - 5.0).abs() < 1e-12);
}

#[test]
fn per_state_blocks_match_the_dense_transform() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let net = random_tree(&mut rng, 6, 3);
    let fm = build_flow_matrices(&net);
    let nt = 2;
    let (mean, g, p) = random_improper(&mut rng, (15 + 3) * nt, 30);
    let latent = ComplexGaussian::new(mean, g.clone(), p.clone()).unwrap();
    let est = propagate_states(&latent, &fm, nt, Mode::Cst, 230.0, QualityScope::BusVoltages).unwrap();
    let t = ibv_transform(&fm, nt).unwrap();
    let dense_g = &t * &g * t.adjoint();
    let dense_c = &t * &p * t.transpose();
    assert!(max_rel_diff(&est.mu_ibv, &(&t * latent.mean())) < 1e-12);
    let scale = max_abs(&dense_g);
    for i in 0..t.nrows() {
        assert!((est.gamma_diag[i] - dense_g[(i, i)].re).abs() < 1e-10 * scale);
        assert!((est.c_diag[i] - dense_c[(i, i)]).norm() < 1e-10 * scale);
    }
    assert!(max_abs(&(est.gamma_ibv(&fm).unwrap() - &dense_g)) < 1e-10 * scale);
    assert!(max_abs(&(est.c_ibv(&fm).unwrap() - &dense_c)) < 1e-10 * scale);
}

#[test]
fn no_real_measurements_returns_the_prior() {
    let net = six_bus();
    let est = Estimator::new(&net, &CorrelationMatrix::identity(5, 1), EstimatorConfig::cs()).unwrap();
    let step = table1_step(&net, 50.0);
    let post = est.estimate_window(std::slice::from_ref(&step)).unwrap();
    let prior = est.prior_estimate(&[step]).unwrap();
    assert_eq!(post.mu_ibv, prior.mu_ibv);
    assert_eq!(post.gamma_diag, prior.gamma_diag);
    assert_eq!(post.conditioning_passes, 1);
    assert_eq!(post.iterations, 1);
}

#[test]
fn exact_injection_meters_reproduce_the_power_flow() {
    let net = six_bus();
    let fm = build_flow_matrices(&net);
    let truth = six_bus_injections(&net, &table1()).map(|z| z * 0.6);
    let mut step = table1_step(&net, 50.0);
    for (s, &v) in truth.iter().enumerate() {
        step.push(real(StateKind::InjectedCurrent, net.order()[s].0, 0, v, 1e-6));
    }
    let est = Estimator::new(&net, &area_correlation(1, 0.8), EstimatorConfig::cs()).unwrap();
    let out = est.estimate_window(&[step]).unwrap();
    let (_, v) = direct_power_flow(&fm, &truth, &[VREF]).unwrap();
    assert!((out.voltages(0) - v).iter().all(|z| z.norm() < 1e-6));
}

#[test]
fn branch_and_voltage_meters_condition_like_the_dense_joint() {
    let net = six_bus();
    let fm = build_flow_matrices(&net);
    let cr = area_correlation(1, 0.7);
    let mut step = table1_step(&net, 50.0);
    let meters = [
        (StateKind::BranchCurrent, 5u32, c(12.0, -9.0), 3.0),
        (StateKind::BusVoltage, 4u32, c(221.0, -3.0), 3.0),
        (StateKind::InjectedCurrent, 2u32, c(11.0, -4.0), 3.0),
    ];
    for &(kind, b, v, e) in &meters {
        step.push(real(kind, b, 0, v, e));
    }
    let est = Estimator::new(&net, &cr, EstimatorConfig::cs()).unwrap();
    let out = est.estimate_window(std::slice::from_ref(&step)).unwrap();

    // Oracle: joint of [latent; IBV + noise] built densely, conditioned on the metered rows.
    let prior = est.prior_estimate(&[step]).unwrap();
    let t = ibv_transform(&fm, 1).unwrap();
    let lat = &prior.latent;
    let l = lat.dim();
    let rows: Vec<usize> = meters
        .iter()
        .map(|&(kind, b, _, _)| prior.index(kind, 0, net.state_index(BusId(b), 0).unwrap()))
        .collect();
    let h = CMatrix::from_fn(3, l, |i, j| t[(rows[i], j)]);
    let n = l + 3;
    let mut g = CMatrix::zeros(n, n);
    let mut p = CMatrix::zeros(n, n);
    let mut big_t = CMatrix::zeros(n, l);
    big_t.view_mut((0, 0), (l, l)).fill_with_identity();
    big_t.view_mut((l, 0), (3, l)).copy_from(&h);
    g.copy_from(&(&big_t * lat.gamma() * big_t.adjoint()));
    p.copy_from(&(&big_t * lat.c() * big_t.transpose()));
    for (i, &(_, _, v, e)) in meters.iter().enumerate() {
        let sd = v * (e / 300.0);
        g[(l + i, l + i)] += c(sd.re * sd.re + sd.im * sd.im, 0.0);
        p[(l + i, l + i)] += c(sd.re * sd.re - sd.im * sd.im, 0.0);
    }
    let mean = &big_t * lat.mean();
    let obs = CVector::from_iterator(3, meters.iter().map(|m| m.2));
    let (om, og, _) = oracle_condition(&mean, &g, &p, &[l, l + 1, l + 2], &obs);
    assert!(max_rel_diff(out.latent.mean(), &om) < 1e-9);
    assert!(max_abs(&(out.latent.gamma() - og)) < 1e-9 * max_abs(lat.gamma()));
}

#[test]
fn adding_a_meter_never_raises_a_variance() {
    let net = six_bus();
    let est = Estimator::new(&net, &area_correlation(3, 0.8), EstimatorConfig::cst(3)).unwrap();
    let base: Vec<_> = (0..3).map(|k| {
        let mut s = table1_step(&net, 50.0);
        s.push(real(StateKind::InjectedCurrent, 2, 0, c(15.0 - k as f64, -5.0), 3.0));
        s
    }).collect();
    let mut more = base.clone();
    more[2].push(real(StateKind::BusVoltage, 6, 0, c(215.0, -6.0), 3.0));
    let a = est.estimate_window(&base).unwrap();
    let b = est.estimate_window(&more).unwrap();
    for i in 0..a.gamma_diag.len() {
        assert!(b.gamma_diag[i] <= a.gamma_diag[i] + 1e-10);
    }
    assert!(b.quality > a.quality);
}

#[test]
fn cst_with_one_step_is_cs() {
    let net = six_bus();
    let cr = area_correlation(3, 0.8);
    let mut step = table1_step(&net, 50.0);
    step.push(real(StateKind::InjectedCurrent, 2, 0, c(14.0, -5.5), 3.0));
    let set = MeasurementSet::new(vec![step.clone(), step.clone(), step]);
    let cs = Estimator::new(&net, &cr, EstimatorConfig::cs()).unwrap().estimate(&set, 2).unwrap();
    let mut cst = Estimator::new(&net, &cr, EstimatorConfig::cst(1)).unwrap().estimate(&set, 2).unwrap();
    assert_eq!(cst.mode, Mode::Cst);
    cst.mode = Mode::Cs;
    assert_eq!(cs, cst);
}

#[test]
fn short_windows_use_the_truncated_correlation() {
    let net = six_bus();
    let cr = area_correlation(3, 0.8);
    let mut step = table1_step(&net, 50.0);
    step.push(real(StateKind::InjectedCurrent, 2, 0, c(14.0, -5.5), 3.0));
    let set = MeasurementSet::new(vec![step]);
    let cst = Estimator::new(&net, &cr, EstimatorConfig::cst(3)).unwrap().estimate(&set, 0).unwrap();
    let mut cs = Estimator::new(&net, &cr, EstimatorConfig::cs()).unwrap().estimate(&set, 0).unwrap();
    cs.mode = Mode::Cst;
    assert_eq!(cs, cst);
}

#[test]
fn estimator_rejects_inconsistent_setups() {
    let net = six_bus();
    assert!(Estimator::new(&net, &CorrelationMatrix::identity(4, 1), EstimatorConfig::cs()).is_err());
    assert!(Estimator::new(&net, &CorrelationMatrix::identity(5, 2), EstimatorConfig::cst(3)).is_err());
    assert!(Estimator::new(&net, &CorrelationMatrix::identity(5, 11), EstimatorConfig::cst(11)).is_err());
    let est = Estimator::new(&net, &CorrelationMatrix::identity(5, 3), EstimatorConfig::cs()).unwrap();
    let step = table1_step(&net, 50.0);
    assert!(est.estimate_window(&[step.clone(), step]).is_err());
    assert!(est.estimate_window(&[]).is_err());
}

#[test]
fn quality_is_independent_of_state_order() {
    let z = |r: f64| scalar(c(r, 0.5 * r));
    let build = |branches| RadialNetwork::new((1..=6).map(|i| bus(i, 1)).collect(), branches, BusId(1), 230.0).unwrap();
    let a = build(vec![branch(1, 2, z(0.1)), branch(2, 3, z(0.2)), branch(3, 4, z(0.3)), branch(2, 5, z(0.2)), branch(5, 6, z(0.3))]);
    let b = build(vec![branch(5, 6, z(0.3)), branch(2, 5, z(0.2)), branch(1, 2, z(0.1)), branch(3, 4, z(0.3)), branch(2, 3, z(0.2))]);
    assert_ne!(a.order(), b.order());
    let run = |net: &RadialNetwork| {
        let mut step = pseudo_step(net, &CVector::zeros(5), 50.0, VREF, 3.0);
        for (s, m) in step.measurements.iter_mut().enumerate() {
            m.value = c(10.0 + net.order()[s].0 as f64, -4.0);
        }
        step.push(real(StateKind::BusVoltage, 4, 0, c(220.0, -2.0), 3.0));
        Estimator::new(net, &CorrelationMatrix::identity(5, 1), EstimatorConfig::cs()).unwrap().estimate_window(&[step]).unwrap()
    };
    let (qa, qb) = (run(&a).quality, run(&b).quality);
    assert!((qa - qb).abs() < 1e-9 * qa.abs());
}

#[test]
fn polar_variance_examples() {
    let real_only = Matrix2::new(0.04, 0.0, 0.0, 0.0);
    let (m, a) = polar_variance(c(2.0, 0.0), &real_only).unwrap();
    assert!((m - 0.04).abs() < 1e-15 && a.abs() < 1e-15);
    let imag_only = Matrix2::new(0.0, 0.0, 0.0, 0.04);
    let (m, a) = polar_variance(c(2.0, 0.0), &imag_only).unwrap();
    assert!(m.abs() < 1e-15 && (a - 0.01).abs() < 1e-15);
    assert!(polar_variance(c(0.0, 0.0), &real_only).is_none());
    assert_eq!(composite_block(5.0, c(-3.0, 0.0)), Matrix2::new(1.0, 0.0, 0.0, 4.0));
}

#[test]
fn zero_mean_states_report_undefined_angle_variance() {
    let net = six_bus();
    let step = pseudo_step(&net, &CVector::zeros(5), 50.0, VREF, 3.0);
    let est = Estimator::new(&net, &CorrelationMatrix::identity(5, 1), EstimatorConfig::cs()).unwrap();
    let out = est.estimate_window(&[step]).unwrap();
    assert_eq!(out.var_ang[0], None);
    assert!(matches!(state_polar_variance(&out, 0), Err(DsseError::ZeroMagnitude(0))));
    let v = out.index(StateKind::BusVoltage, 0, 0);
    assert!(out.var_mag[v].unwrap() > 0.0);
}

#[test]
fn delta_method_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let x = c(230.0, -12.0);
    let a = nalgebra::Matrix2::new(3.0, 0.0, 1.5, 2.0);
    let k = a * a.transpose() * 0.5;
    let (vm, va) = polar_variance(x, &k).unwrap();
    let chol = k.cholesky().unwrap().l();
    let n = 1_000_000;
    let (mut sm, mut sm2, mut sa, mut sa2) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..n {
        let z = nalgebra::Vector2::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
        let d = chol * z;
        let s = c(x.re + d[0], x.im + d[1]);
        let (m, ang): (f64, f64) = (s.norm(), s.arg());
        sm += m;
        sm2 += m * m;
        sa += ang;
        sa2 += ang * ang;
    }
    let nf = n as f64;
    let mc_m = sm2 / nf - (sm / nf).powi(2);
    let mc_a = sa2 / nf - (sa / nf).powi(2);
    assert!((vm / mc_m - 1.0).abs() < 0.1, "{vm} vs {mc_m}");
    assert!((va / mc_a - 1.0).abs() < 0.1, "{va} vs {mc_a}");
}

#[test]
fn quality_examples() {
    assert_eq!(quality_from_trace(1.0), 0.0);
    assert!((quality_from_trace(10.0) + std::f64::consts::LN_10).abs() < 1e-12);
    assert_eq!(quality_from_trace(0.0), f64::INFINITY);
}

#[test]
fn all_state_quality_counts_currents_too() {
    let net = six_bus();
    let mut step = table1_step(&net, 50.0);
    step.push(real(StateKind::InjectedCurrent, 2, 0, c(14.0, -5.5), 3.0));
    let mut cfg = EstimatorConfig::cs();
    let volts = Estimator::new(&net, &CorrelationMatrix::identity(5, 1), cfg).unwrap().estimate_window(std::slice::from_ref(&step)).unwrap();
    cfg.quality_scope = QualityScope::AllStates;
    let all = Estimator::new(&net, &CorrelationMatrix::identity(5, 1), cfg).unwrap().estimate_window(&[step]).unwrap();
    assert!(all.quality < volts.quality);
}

#[test]
fn pseudo_powers_become_currents() {
    let net = six_bus();
    let fm = build_flow_matrices(&net);
    let s: Vec<Complex64> = table1().iter().map(|&i| VREF * i.conj()).collect();
    let at_ref = pseudo_currents_from_power(&fm, &s, &[VREF], AngleReference::ReferenceBus).unwrap();
    assert!(max_rel_diff(&at_ref, &CVector::from_vec(table1())) < 1e-12);

    let flowed = pseudo_currents_from_power(&fm, &s, &[VREF], AngleReference::PowerFlow).unwrap();
    let (_, v) = direct_power_flow(&fm, &flowed, &[VREF]).unwrap();
    for k in 0..5 {
        assert!((v[k] * flowed[k].conj() - s[k]).norm() < 1e-8 * s[k].norm());
    }
    assert!(pseudo_currents_from_power(&fm, &s[..3], &[VREF], AngleReference::PowerFlow).is_err());
}

#[test]
fn measurement_validation() {
    let net = six_bus();
    let est = Estimator::new(&net, &CorrelationMatrix::identity(5, 1), EstimatorConfig::cs()).unwrap();
    let mut dup = table1_step(&net, 50.0);
    dup.push(real(StateKind::InjectedCurrent, 2, 0, c(1.0, 0.0), 3.0));
    dup.push(real(StateKind::InjectedCurrent, 2, 0, c(1.0, 0.0), 3.0));
    assert!(est.estimate_window(&[dup]).is_err());
    let mut neg = table1_step(&net, 50.0);
    neg.measurements[0].epsilon = -1.0;
    assert!(est.estimate_window(&[neg]).is_err());
    let mut unknown = table1_step(&net, 50.0);
    unknown.push(real(StateKind::BusVoltage, 42, 0, c(1.0, 0.0), 3.0));
    assert!(est.estimate_window(&[unknown]).is_err());
    let mut on_ref = table1_step(&net, 50.0);
    on_ref.push(real(StateKind::BusVoltage, 1, 0, c(231.0, 0.5), 1.0));
    let out = est.estimate_window(&[on_ref.clone()]).unwrap();
    assert!(out.voltages(0)[0].re > 0.0);
    // a purely real reading of a purely real reference leaves a zero-variance direction
    on_ref.measurements.last_mut().unwrap().value = c(231.0, 0.0);
    assert!(matches!(est.estimate_window(&[on_ref]), Err(DsseError::DegenerateMeasurements { .. })));
}
