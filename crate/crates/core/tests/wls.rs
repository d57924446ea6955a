mod common;

use common::*;
use dsse_core::complexstats::CorrelationMatrix;
use dsse_core::estimator::{Estimator, EstimatorConfig, MeasurementStep, StateKind};
use dsse_core::netmodel::{build_flow_matrices, direct_power_flow};
use dsse_core::wls::{wls_estimate, WlsEstimator, WlsOptions};
use dsse_core::{CVector, Complex64, DsseError};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const VREF: Complex64 = Complex64::new(230.0, 0.0);

#[test]
fn exact_measurements_are_a_fixed_point() {
    let net = six_bus();
    let fm = build_flow_matrices(&net);
    let truth = six_bus_injections(&net, &table1());
    let (br, v) = direct_power_flow(&fm, &truth, &[VREF]).unwrap();
    let mut step = pseudo_step(&net, &truth, 3.0, VREF, 1.0);
    step.push(real(StateKind::BranchCurrent, 3, 0, br[1], 1.0));
    step.push(real(StateKind::BusVoltage, 6, 0, v[4], 1.0));
    let out = wls_estimate(&net, &step, WlsOptions::default()).unwrap();
    assert!(out.converged);
    assert!(out.iterations <= 10);
    assert!(max_rel_diff(&out.voltages, &v) < 1e-8);
    assert!(out.objective < 1e-12);
    assert!((out.reference_voltage[0] - VREF).norm() < 1e-6);
}

#[test]
fn reference_alone_is_not_observable() {
    let net = six_bus();
    let step = MeasurementStep::new(vec![VREF], 3.0);
    let err = wls_estimate(&net, &step, WlsOptions::default()).unwrap_err();
    assert!(matches!(err, DsseError::NotObservable(_)), "{err}");
}

#[test]
fn determined_case_equals_the_pseudo_power_flow() {
    let net = six_bus();
    let fm = build_flow_matrices(&net);
    let pseudo = six_bus_injections(&net, &table1());
    let step = pseudo_step(&net, &pseudo, 50.0, VREF, 3.0);
    let out = wls_estimate(&net, &step, WlsOptions::default()).unwrap();
    let (_, v) = direct_power_flow(&fm, &pseudo, &[VREF]).unwrap();
    assert!(max_rel_diff(&out.voltages, &v) < 1e-8);
}

#[test]
fn three_estimators_agree_on_noise_free_complete_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let net = random_tree(&mut rng, 8, 3);
    let fm = build_flow_matrices(&net);
    let truth = random_currents(&mut rng, net.state_len());
    let vref: Vec<Complex64> = (0..3).map(|k| Complex64::from_polar(230.0, -2.0943951 * k as f64)).collect();
    let (_, v) = direct_power_flow(&fm, &truth, &vref).unwrap();
    let mut step = MeasurementStep::new(vref.clone(), 1e-9);
    let p = 3;
    for s in 0..net.state_len() {
        step.push(dsse_core::estimator::Measurement::pseudo(net.order()[s / p], s % p, truth[s] * 1.2, 50.0));
        step.push(real(StateKind::InjectedCurrent, net.order()[s / p].0, s % p, truth[s], 1e-7));
    }
    let w = wls_estimate(&net, &step, WlsOptions::default()).unwrap();
    assert!(w.converged);
    assert!(max_rel_diff(&w.voltages, &v) < 1e-6);
    let est = Estimator::new(&net, &CorrelationMatrix::identity(net.state_len(), 1), EstimatorConfig::cs())
        .unwrap()
        .estimate_window(&[step])
        .unwrap();
    assert!(max_rel_diff(&est.voltages(0), &v) < 1e-6);
}

#[test]
fn correlated_weights_change_the_estimate() {
    let net = six_bus();
    let fm = build_flow_matrices(&net);
    let pseudo = six_bus_injections(&net, &table1());
    let truth = pseudo.map(|z| z * 0.6);
    let (_, v) = direct_power_flow(&fm, &truth, &[VREF]).unwrap();
    let mut step = pseudo_step(&net, &pseudo, 50.0, VREF, 3.0);
    step.push(real(StateKind::InjectedCurrent, 2, 0, truth[0], 3.0));
    let n = 5;
    let corr = DMatrix::from_fn(2 * n, 2 * n, |i, j| if i == j { 1.0 } else if (i < n) == (j < n) { 0.8 } else { 0.2 });
    let cr = CorrelationMatrix::new(1, n, corr).unwrap();
    let plain = wls_estimate(&net, &step, WlsOptions::default()).unwrap();
    let corr_opts = WlsOptions {
        correlation: Some(cr),
        ..WlsOptions::default()
    };
    let correlated = WlsEstimator::new(&net, corr_opts).unwrap().estimate(&step).unwrap();
    assert!(plain.converged && correlated.converged);
    let err = |x: &CVector| (0..5).map(|k| (x[k].norm() - v[k].norm()).abs()).sum::<f64>();
    assert!(err(&correlated.voltages) < err(&plain.voltages));
    assert!(correlated.quality.is_finite());
}

#[test]
fn iteration_cap_reports_non_convergence() {
    let net = six_bus();
    let truth = six_bus_injections(&net, &table1());
    let mut step = pseudo_step(&net, &truth, 50.0, VREF, 3.0);
    step.push(real(StateKind::BusVoltage, 4, 0, c(180.0, -30.0), 3.0));
    let opts = WlsOptions {
        max_iterations: 1,
        ..WlsOptions::default()
    };
    let out = wls_estimate(&net, &step, opts).unwrap();
    assert!(!out.converged);
    assert_eq!(out.iterations, 1);
    assert!(out.residual_norm >= 1e-6);
}

#[test]
fn magnitudes_are_per_unit() {
    let net = six_bus();
    let pseudo = six_bus_injections(&net, &CVector::zeros(5).iter().copied().collect::<Vec<_>>());
    let step = pseudo_step(&net, &pseudo, 50.0, VREF, 3.0);
    let out = wls_estimate(&net, &step, WlsOptions::default()).unwrap();
    assert!(out.magnitudes.iter().all(|m| (m - 1.0).abs() < 1e-9));
    assert!(out.angles.iter().all(|a| a.abs() < 1e-9));
}
