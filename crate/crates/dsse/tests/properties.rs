use dsse::generator::{gen_synthetic_profiles, CommunitySpec};
use dsse::io::{read_correlation, read_profiles_paired, write_correlation, write_profiles_paired};
use dsse::metrics::error_metrics;
use dsse_core::complexstats::cr_from_profiles;
use dsse_core::Complex64;
use proptest::prelude::*;
use tempfile::tempdir;

fn voltages(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.5f64..2.0, -180.0f64..180.0), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn errors_are_non_negative_and_bounded(
        (truth, est) in (1usize..20).prop_flat_map(|n| (voltages(n), voltages(n)))
    ) {
        let polar = |v: &[(f64, f64)]| -> Vec<Complex64> {
            v.iter().map(|&(m, a)| Complex64::from_polar(m, a.to_radians())).collect()
        };
        let m = error_metrics(&polar(&est), &polar(&truth)).unwrap();
        prop_assert!(m.amve_pct >= 0.0 && m.aave_deg >= 0.0);
        prop_assert!(m.mmve_pct + 1e-12 >= m.amve_pct);
        prop_assert!(m.mave_deg + 1e-12 >= m.aave_deg);
        prop_assert!(m.mave_deg <= 180.0 + 1e-9);
    }

    #[test]
    fn common_rotation_and_scale_cancel(
        truth in (1usize..20).prop_flat_map(voltages),
        scale in 0.1f64..10.0,
        turn in -180.0f64..180.0,
    ) {
        let rot = Complex64::from_polar(scale, turn.to_radians());
        let t: Vec<Complex64> = truth.iter().map(|&(m, a)| Complex64::from_polar(m, a.to_radians())).collect();
        let e: Vec<Complex64> = t.iter().map(|v| v * 1.02).collect();
        let base = error_metrics(&e, &t).unwrap();
        let te: Vec<Complex64> = t.iter().map(|v| v * rot).collect();
        let ee: Vec<Complex64> = e.iter().map(|v| v * rot).collect();
        let moved = error_metrics(&ee, &te).unwrap();
        prop_assert!((base.amve_pct - moved.amve_pct).abs() < 1e-9);
        prop_assert!((base.amve_pct - 2.0).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn profile_and_correlation_files_round_trip(seed in any::<u64>(), n_areas in 1usize..5, nt in 1usize..4) {
        let spec = CommunitySpec { n_areas, samples: 96, seed, ..CommunitySpec::default() };
        let profiles = gen_synthetic_profiles(&spec).unwrap();
        let dir = tempdir().unwrap();
        let p = dir.path().join("p.csv");
        write_profiles_paired(&p, &profiles).unwrap();
        prop_assert_eq!(&read_profiles_paired(&p, spec.sample_interval_min).unwrap(), &profiles);

        let cr = cr_from_profiles(&profiles, nt).unwrap();
        let c = dir.path().join("cr.csv");
        write_correlation(&c, &cr).unwrap();
        let back = read_correlation(&c).unwrap();
        prop_assert_eq!(back.matrix(), cr.matrix());
    }
}
