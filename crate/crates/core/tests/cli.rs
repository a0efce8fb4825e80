use std::path::Path;
use std::process::Command;

fn polydich(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_polydich")).args(args).output().expect("binary runs");
    (out.status.code().expect("exit code"), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn scenario_list_names_every_scenario() {
    let (code, stdout) = polydich(&["scenario", "list"]);
    assert_eq!(code, 0);
    for (name, _) in polydich::evolution::scenario_names() {
        assert!(stdout.contains(name), "{name} missing");
    }
}

#[test]
fn certify_diagonal_dichotomy_passes_and_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, _) = polydich(&["certify", "--scenario", "diag_dichotomy", "--lambda", "1", "--out", out]);
    assert_eq!(code, 0);
    let cert = json(&dir.path().join("certificate.json"));
    assert_eq!(cert["schema"], "polydich/certificate@1");
    assert!((cert["lambda_stable"].as_f64().unwrap() - 1.0).abs() < 0.05);
    assert!(dir.path().join("points.csv").exists());
}

#[test]
fn certify_counterexample_fails_with_exit_2() {
    assert_eq!(polydich(&["certify", "--scenario", "counterexample"]).0, 2);
}

#[test]
fn certify_contraction_mode_passes() {
    assert_eq!(polydich(&["certify", "--scenario", "scalar_contraction", "--lambda", "1", "--contraction"]).0, 0);
}

#[test]
fn certify_under_lyapunov_norm() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, _) = polydich(&["certify", "--scenario", "diag_dichotomy", "--lyapunov", "--out", out]);
    assert_eq!(code, 0);
    let cert = json(&dir.path().join("certificate.json"));
    assert!(cert["d"].as_f64().unwrap() <= 1.0 + 1e-6);
    assert!(dir.path().join("certificate-constant.json").exists());
}

#[test]
fn counterexample_is_admissible_but_not_certifiable() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, _) = polydich(&["admissibility", "--scenario", "counterexample", "--contraction", "--out", out]);
    assert_eq!(code, 0);
    let report = json(&dir.path().join("admissibility.json"));
    assert!(report["summary"]["worst_ratio"].as_f64().unwrap() <= 2.0);
    assert_eq!(report["certificate_pass"], false);
}

#[test]
fn zero_battery_passes() {
    assert_eq!(polydich(&["admissibility", "--scenario", "diag_dichotomy", "--battery", "zero"]).0, 0);
}

#[test]
fn green_solve_round_trips_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(polydich(&["green-solve", "--scenario", "diag_dichotomy", "--forcing", "tail", "--out", out]).0, 0);
    let x = dir.path().join("x.csv");
    let report = json(&dir.path().join("green.json"));
    assert_eq!(report["report"]["pass"], true);
    // the solution itself is a valid forcing term
    assert_eq!(polydich(&["green-solve", "--scenario", "diag_dichotomy", "--input", x.to_str().unwrap()]).0, 0);
}

#[test]
fn robustness_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, _) = polydich(&["robustness", "--scenario", "diag_dichotomy", "--c-grid", "0,0.01,0.05", "--out", out]);
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert_eq!(polydich(&["robustness", "--scenario", "scalar_contraction", "--c-grid", "2"]).0, 2);
    let (code, _) =
        polydich(&["robustness", "--scenario", "scalar_contraction", "--c-grid", "0.05,2", "--threshold", "1"]);
    assert_eq!(code, 0);
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(polydich(&["robustness", "--scenario", "scalar_contraction", "--c-grid", ""]).0, 64);
    assert_eq!(polydich(&["certify"]).0, 64);
    assert_eq!(polydich(&["certify", "--scenario", "no_such_family"]).0, 64);
    assert_eq!(polydich(&["certify", "--scenario", "diag_dichotomy", "--param", "nope=1"]).0, 64);
    assert_eq!(polydich(&["--density", "4", "scenario", "list"]).0, 64);
    assert_eq!(polydich(&["--tol", "0", "scenario", "list"]).0, 64);
}

#[test]
fn ambiguous_split_is_a_computational_error() {
    assert_eq!(polydich(&["certify", "--scenario", "neutral"]).0, 1);
}

#[test]
fn reports_are_byte_identical_for_a_fixed_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = dir.path().to_str().unwrap();
        assert_eq!(polydich(&["certify", "--scenario", "oblique_dichotomy", "--seed", "11", "--out", out]).0, 0);
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("certificate.json")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn scenario_file_and_generator_table() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"name": "diag_dichotomy", "params": {"lambda": 0.5}}"#).unwrap();
    assert_eq!(polydich(&["certify", "--scenario-file", spec.to_str().unwrap()]).0, 0);

    let table = dir.path().join("a.csv");
    let mut text = String::from("t,a11\n");
    for t in polydich::grid::log_spaced(1.0, 1000.0, 300) {
        text.push_str(&format!("{t},{}\n", -1.0 / t));
    }
    std::fs::write(&table, text).unwrap();
    let (code, stdout) = polydich(&["certify", "--generator-csv", table.to_str().unwrap(), "--projection", "identity"]);
    assert_eq!(code, 0, "{stdout}");
}
