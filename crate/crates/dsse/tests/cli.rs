use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn dsse(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsse"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn help_and_unknown_commands() {
    let dir = tempdir().unwrap();
    assert_eq!(code(&dsse(dir.path(), &["--help"])), 0);
    assert_eq!(code(&dsse(dir.path(), &["frobnicate"])), 2);
    assert_eq!(code(&dsse(dir.path(), &["estimate"])), 2);
}

#[test]
fn data_to_estimate_pipeline() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("spec.json"), r#"{"n_areas": 5, "samples": 480}"#).unwrap();
    let out = dsse(d, &["gen-data", "--spec", "spec.json", "--seed", "3", "--out", "data"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(d.join("data/profiles_re.csv").exists() && d.join("data/profiles_im.csv").exists());

    let out = dsse(
        d,
        &[
            "corr", "--profiles", "data/profiles_re.csv", "--imag", "data/profiles_im.csv", "--nt", "3",
            "--network", "six-bus", "--out", "cr.csv",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let cr = dsse::io::read_correlation(&d.join("cr.csv")).unwrap();
    assert_eq!((cr.nt(), cr.n_vars()), (3, 5));

    let out = dsse(d, &["run-scenario", "--network", "six-bus", "--mode", "cs", "--out", "run"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["metrics.csv", "metrics.json", "states.csv", "measurements.json"] {
        assert!(d.join("run").join(f).exists(), "{f}");
    }

    for mode in ["cs", "cst", "wls"] {
        let out = dsse(
            d,
            &[
                "estimate", "--network", "six-bus", "--corr", "cr.csv", "--measurements", "run/measurements.json",
                "--mode", mode, "--out", mode,
            ],
        );
        assert_eq!(code(&out), 0, "{mode}: {}", String::from_utf8_lossy(&out.stderr));
        let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join(mode).join("estimate.json")).unwrap()).unwrap();
        assert!(json.is_object());
        assert!(d.join(mode).join("estimate.csv").exists());
    }
}

#[test]
fn paired_profiles_and_indefinite_matrices() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("spec.json"), r#"{"n_areas": 2, "samples": 96}"#).unwrap();
    assert_eq!(code(&dsse(d, &["gen-data", "--spec", "spec.json", "--paired", "--out", "p"])), 0);
    assert!(d.join("p/profiles.csv").exists());
    assert_eq!(code(&dsse(d, &["corr", "--profiles", "p/profiles.csv", "--nt", "2", "--out", "cr.csv"])), 0);

    // Pairwise lagged estimates on a tiny series can give an indefinite matrix.
    fs::write(d.join("re.csv"), "A,B,C\n1,2,0\n2,1,3\n3,3,1\n").unwrap();
    fs::write(d.join("im.csv"), "A,B,C\n0,1,2\n1,0,0\n0,1,1\n").unwrap();
    let args = ["corr", "--profiles", "re.csv", "--imag", "im.csv", "--nt", "2", "--out", "x.csv"];
    let strict = code(&dsse(d, &args));
    let mut repaired = args.to_vec();
    repaired.push("--nearest-pd");
    assert_eq!(code(&dsse(d, &repaired)), 0);
    assert!(strict == 0 || strict == 2);
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    let cases: [&[&str]; 4] = [
        &["estimate", "--network", "missing.json", "--measurements", "m.json"],
        &["run-scenario", "--network", "lv23", "--rx-scale", "5", "--mode", "cs", "--out", "o"],
        &["run-scenario", "--config", "absent.json"],
        &["corr", "--profiles", "absent.csv"],
    ];
    for args in cases {
        let out = dsse(d, args);
        assert_eq!(code(&out), 2, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn unobservable_measurements_exit_with_three() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("m.json"), r#"{"steps":[{"vref":[[6350,0]],"vref_epsilon":3,"measurements":[]}]}"#).unwrap();
    for mode in ["cs", "wls"] {
        let out = dsse(d, &["estimate", "--network", "six-bus", "--measurements", "m.json", "--mode", mode, "--out", "o"]);
        assert_eq!(code(&out), 3, "{mode}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn bench_writes_a_table() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    let out = dsse(d, &["bench", "--network", "six-bus", "--runs", "1", "--out", "b"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(d.join("b/bench.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("case,mode,states,time_s,iterations"));
    assert_eq!(lines.count(), 3);
}
