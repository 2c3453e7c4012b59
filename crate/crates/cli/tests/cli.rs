use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_odeblowup"))
        .args(args)
        .arg("--out")
        .arg(dir.join("out"))
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["verify", "--d", "5", "--p", "3", "--N", "64", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("PASS") && !stdout.contains("FAIL"), "{stdout}");
    let report = read_json(&dir.path().join("out/verify_d5_p3_n64_s7.json"));
    assert!(report["suites"].as_array().unwrap().iter().all(|s| s["passed"] == true));
}

#[test]
fn spectrum_reports_unstable_eigenvalue() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["spectrum", "--d", "5", "--p", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let report = read_json(&dir.path().join("out/spectrum_d5_p3_n64_s7.json"));
    let top = report["rightmost"]["re"].as_f64().unwrap();
    assert!((top - 1.0).abs() <= 1e-6, "{top}");
}

#[test]
fn static_evolution_stays_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["evolve", "--d", "5", "--p", "3", "--perturb", "none", "--T-offset", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("out/evolve_d5_p3_n32_s7.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("tau,full_norm,stable_norm,unstable_coeff"));
    let max = lines
        .map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    assert!(max <= 1e-9);
    let meta = read_json(&dir.path().join("out/evolve_d5_p3_n32_s7.json"));
    assert_eq!(meta["aborted"], false);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# exact-family shooting\nd = 5\np = 3\nN = 16\nperturb = family\namplitude = 2e-4\ntau_probe = 6\nseed = 3\n").unwrap();
    let out = run(dir.path(), &["rates", "--config", cfg.to_str().unwrap(), "--N", "20"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = read_json(&dir.path().join("out/rates_d5_p3_n20_s3_report.json"));
    let t_star = rep["t_star"].as_f64().unwrap();
    assert!((t_star - 1.0002).abs() < 1e-6, "{t_star}");
}

#[test]
fn outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["evolve", "--perturb", "gaussian", "--amplitude", "1e-4", "--tau-end", "2", "--N", "16"];
    run(dir.path(), &args);
    let first = fs::read(dir.path().join("out/evolve_d5_p3_n16_s7.csv")).unwrap();
    run(dir.path(), &args);
    let second = fs::read(dir.path().join("out/evolve_d5_p3_n16_s7.csv")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn failures_have_distinct_codes_and_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["evolve", "--delta", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let record: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(record["kind"], "usage");

    let out = run(dir.path(), &["spectrum", "--d", "6"]);
    assert_eq!(out.status.code(), Some(2));

    // beyond the spec scale the resolvent check hits the roundoff floor
    let out = run(dir.path(), &["resolvent", "--d", "7", "--N", "128"]);
    assert_eq!(out.status.code(), Some(1));
    let record: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(record["kind"], "check_failed");
    let report = read_json(&dir.path().join("out/resolvent_d7_p3_n128_s7.json"));
    assert_eq!(report["passed"], false);

    // a missing profile file is an io failure
    let out = run(dir.path(), &["evolve", "--perturb", "profile", "--profile", "missing.csv"]);
    assert_eq!(out.status.code(), Some(4));
    let record: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(record["kind"], "io");

    // family data outside the bracket has no sign change
    let out = run(dir.path(), &["rates", "--perturb", "family", "--amplitude", "5e-4", "--delta", "1e-4", "--N", "16"]);
    assert_eq!(out.status.code(), Some(3));
    let record: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(record["kind"], "numerical");
}

#[test]
fn sampled_profile_is_ingested() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("# r, f, g\n");
    for k in 0..=60 {
        let r = 1.5 * k as f64 / 60.0;
        text.push_str(&format!("{r}, {}, 0\n", 1e-5 * (-r * r).exp()));
    }
    fs::write(dir.path().join("v.csv"), text).unwrap();
    let out = run(dir.path(), &["evolve", "--perturb", "profile", "--profile", "v.csv", "--tau-end", "2", "--N", "16"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/evolve_d5_p3_n16_s7.csv")).unwrap();
    let first: f64 = csv.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!(first > 1e-7 && first < 1e-3, "{first}");
}
