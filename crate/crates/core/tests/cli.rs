use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dipolar-cft"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn summary(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn help_lists_every_command_and_flag() {
    let out = Command::new(env!("CARGO_BIN_EXE_dipolar-cft"))
        .arg("--help")
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for word in [
        "simulate",
        "observables",
        "verify-identities",
        "drift-test",
        "schramm",
        "lattice-green",
        "kernels",
        "--config",
        "--out",
        "--seed",
        "--n-paths",
        "--dt",
        "--T",
        "--kappa",
        "--tolerance",
    ] {
        assert!(text.contains(word), "missing {word}");
    }
}

#[test]
fn unknown_flag_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["simulate", "--frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_identities_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["verify-identities"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let doc = summary(&dir.path().join("identities.json"));
    assert_eq!(doc["schema"], 1);
    assert_eq!(doc["pass"], true);
    assert!(doc["generated_at_unix"].as_u64().is_some());
}

#[test]
fn kernels_pass() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&["kernels"], dir.path()).status.success());
}

#[test]
fn symmetric_curve_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["simulate", "--kappa", "0", "--T", "1"], dir.path());
    assert!(out.status.success());
    let mut rdr = csv::Reader::from_path(dir.path().join("curve.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["t", "re", "im"]);
    let mut n = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let re: f64 = rec[1].parse().unwrap();
        assert!(re.abs() < 1e-8);
        n += 1;
    }
    assert_eq!(n, 1001);
}

#[test]
fn observables_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["observables", "--n-paths", "12", "--seed", "5"];
    assert!(run(&args, a.path()).status.success());
    assert!(run(&args, b.path()).status.success());
    let x = fs::read(a.path().join("observables.csv")).unwrap();
    let y = fs::read(b.path().join("observables.csv")).unwrap();
    assert_eq!(x, y);
    let header = String::from_utf8(x)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert_eq!(header, "path_id,t,observable,point_id,re,im,stopped");
}

#[test]
fn drift_test_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["drift-test", "--n-paths", "200", "--T", "0.2"],
        dir.path(),
    );
    let code = out.status.code().unwrap();
    assert!(code == 0 || code == 3);
    assert!(dir.path().join("drift.csv").exists());
    let doc = summary(&dir.path().join("drift.json"));
    assert_eq!(doc["schema"], 1);
    assert_eq!(doc["pass"], code == 0);
}

#[test]
fn schramm_small_run_has_ten_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["schramm", "--n-paths", "20", "--T", "1"], dir.path());
    assert!(matches!(out.status.code(), Some(0) | Some(3)));
    let rows = csv::Reader::from_path(dir.path().join("schramm.csv"))
        .unwrap()
        .records()
        .count();
    assert_eq!(rows, 10);
}

#[test]
fn bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"n_paths": 10, "dt": 0.0}"#).unwrap();
    let out = run(
        &["observables", "--config", cfg.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    fs::write(&cfg, r#"{"observables": ["nope"]}"#).unwrap();
    let out = run(
        &["observables", "--config", cfg.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    fs::write(&cfg, "not json").unwrap();
    let out = run(
        &["observables", "--config", cfg.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failing_check_exits_three_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["lattice-green", "--tolerance", "1e-12"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lattice.json"));
}
