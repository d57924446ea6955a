use std::fs;

use dsse::generator::{gen_synthetic_profiles, CommunitySpec};
use dsse::io::*;
use dsse::networks::bundled;
use dsse::scenario::{Scenario, ScenarioConfig};
use dsse::HarnessError;
use dsse_core::complexstats::{cr_from_profiles, CorrelationMatrix};
use dsse_core::netmodel::BusId;
use tempfile::tempdir;

#[test]
fn bundled_networks_round_trip_through_json() {
    let dir = tempdir().unwrap();
    for name in ["six-bus", "ieee123", "lv23"] {
        let case = bundled(name).unwrap();
        let path = dir.path().join(format!("{name}.json"));
        write_case(&path, &case).unwrap();
        let back = read_case(&path).unwrap();
        assert_eq!(NetworkFile::from_case(&back), NetworkFile::from_case(&case), "{name}");
        assert_eq!(back.network.order(), case.network.order());
        assert_eq!(back.loads, case.loads);
        assert_eq!(back.meters, case.meters);
    }
}

#[test]
fn network_json_rejects_bad_shapes() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("net.json");
    let text = r#"{"buses":[{"id":1},{"id":2}],
        "branches":[{"from":1,"to":2,"resistance":[[1.0,0.0]],"reactance":[[1.0]]}],
        "reference_bus":1,"base_voltage_v":230.0,"phase_count":1}"#;
    fs::write(&path, text).unwrap();
    assert!(matches!(read_case(&path), Err(HarnessError::Input(_))));
    fs::write(&path, r#"{"buses":[]"#).unwrap();
    assert!(matches!(read_case(&path), Err(HarnessError::Parse { .. })));
    let missing = dir.path().join("absent.json");
    assert!(matches!(read_case(&missing), Err(HarnessError::Io { .. })));
}

#[test]
fn branch_csv_builds_a_single_phase_feeder() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("feeder.csv");
    fs::write(&path, "from,to,r_ohm,x_ohm\n1,2,0.1,0.05\n2,3,0.2,0.1\n2,4,0.3,0.1\n").unwrap();
    let case = read_branch_csv(&path, None, 230.0).unwrap();
    assert_eq!(case.name, "feeder");
    assert_eq!(case.network.reference_bus(), BusId(1));
    assert_eq!(case.network.phase_count(), 1);
    assert_eq!(case.network.state_len(), 3);

    fs::write(&path, "from,to,r_ohm,x_ohm\n1,2,0.1\n").unwrap();
    assert!(read_branch_csv(&path, None, 230.0).is_err());
    fs::write(&path, "from,to,r_ohm,x_ohm\n").unwrap();
    assert!(matches!(read_branch_csv(&path, None, 230.0), Err(HarnessError::Parse { .. })));
}

fn profiles() -> Vec<dsse_core::complexstats::LoadProfile> {
    let spec = CommunitySpec {
        n_areas: 3,
        samples: 64,
        ..CommunitySpec::default()
    };
    gen_synthetic_profiles(&spec).unwrap()
}

#[test]
fn profiles_round_trip_in_both_layouts() {
    let dir = tempdir().unwrap();
    let original = profiles();
    let (re, im) = (dir.path().join("re.csv"), dir.path().join("im.csv"));
    write_profiles_split(&re, &im, &original).unwrap();
    assert_eq!(read_profiles_split(&re, &im, 30.0).unwrap(), original);

    let paired = dir.path().join("nested/profiles.csv");
    write_profiles_paired(&paired, &original).unwrap();
    assert_eq!(read_profiles_paired(&paired, 30.0).unwrap(), original);
}

#[test]
fn profile_files_must_agree() {
    let dir = tempdir().unwrap();
    let (re, im) = (dir.path().join("re.csv"), dir.path().join("im.csv"));
    fs::write(&re, "A1,A2\n1,2\n3,4\n").unwrap();
    fs::write(&im, "A1,A3\n1,2\n3,4\n").unwrap();
    assert!(matches!(read_profiles_split(&re, &im, 30.0), Err(HarnessError::Input(_))));
    fs::write(&im, "A1,A2\n1,x\n3,4\n").unwrap();
    assert!(matches!(read_profiles_split(&re, &im, 30.0), Err(HarnessError::Parse { .. })));

    let paired = dir.path().join("p.csv");
    fs::write(&paired, "A1_re,A2_im\n1,2\n").unwrap();
    assert!(matches!(read_profiles_paired(&paired, 30.0), Err(HarnessError::Parse { .. })));
    fs::write(&paired, "A1_re,A1_im,A2_re\n1,2,3\n").unwrap();
    assert!(matches!(read_profiles_paired(&paired, 30.0), Err(HarnessError::Parse { .. })));
}

#[test]
fn correlation_round_trips_exactly() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("cr.csv");
    let cr = cr_from_profiles(&profiles(), 3).unwrap();
    write_correlation(&path, &cr).unwrap();
    let back = read_correlation(&path).unwrap();
    assert_eq!(back.nt(), 3);
    assert_eq!(back.n_vars(), 3);
    assert_eq!(back.matrix(), cr.matrix());
}

#[test]
fn correlation_csv_errors() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("cr.csv");
    fs::write(&path, "1,0\n0,1\n").unwrap();
    assert!(matches!(read_correlation(&path), Err(HarnessError::Parse { .. })));
    fs::write(&path, "# nt=1 n_vars=1\n1,0\n0,1\n0,0\n").unwrap();
    assert!(matches!(read_correlation(&path), Err(HarnessError::Parse { .. })));
    fs::write(&path, "# nt=1 n_vars=1\n1,0,0\n0,1\n").unwrap();
    assert!(matches!(read_correlation(&path), Err(HarnessError::Parse { .. })));
    fs::write(&path, "# nt=1 n_vars=1\n1,0.5\n0.2,1\n").unwrap();
    assert!(read_correlation(&path).is_err());
    write_correlation(&path, &CorrelationMatrix::identity(2, 1)).unwrap();
    assert_eq!(read_correlation(&path).unwrap(), CorrelationMatrix::identity(2, 1));
}

#[test]
fn measurements_round_trip() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("m.json");
    let scenario = Scenario::build(&ScenarioConfig::default()).unwrap();
    write_measurements(&path, &scenario.measurements).unwrap();
    assert_eq!(read_measurements(&path).unwrap(), scenario.measurements);

    fs::write(&path, r#"{"steps":[{"vref":[[1,0]],"vref_epsilon":3,"measurements":[],"extra":1}]}"#).unwrap();
    assert!(matches!(read_measurements(&path), Err(HarnessError::Parse { .. })));
}
