use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spikecert"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn valid_laplace_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("certify-laplace-valid.json");
    let out = run(&["certify", "--config", path_str(&cfg), "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_json(&out)["eta_v"]["valid"], Value::Bool(true));
    let written: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("verdict.json")).unwrap()).unwrap();
    assert_eq!(written["eta_v"]["valid"], Value::Bool(true));
    let csv = fs::read_to_string(dir.path().join("eta.csv")).unwrap();
    assert!(csv.starts_with("t,eta,eta_dd_flags\n"));
    assert!(csv.lines().count() > 4001);
}

#[test]
fn adversarial_gaussian_exits_two() {
    let cfg = fixture("certify-gauss-adversarial.json");
    let out = run(&["certify", "--config", path_str(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    let v = stdout_json(&out);
    assert_eq!(v["eta_v"]["valid"], Value::Bool(false));
    assert_eq!(v["eta_v"]["failure_reason"], Value::String("ExceedsOne".into()));
}

#[test]
fn malformed_json_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{\"framework\": ").unwrap();
    let out = run(&["certify", "--config", path_str(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn unknown_verb_and_field_rejected() {
    assert_eq!(run(&["plot", "--config", "x.json"]).status.code(), Some(1));
    let cfg = fixture("certify-laplace-valid.json");
    let out = run(&["certify", "--config", path_str(&cfg), "--set", "policy.no_such_knob=1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn set_and_grid_overrides() {
    let cfg = fixture("certify-laplace-valid.json");
    let out = run(&["certify", "--config", path_str(&cfg), "--grid", "501"]);
    assert_eq!(stdout_json(&out)["eta_v"]["grid"]["uniform_points"], Value::from(501));
    // Array-valued overrides replace the whole spike list.
    let out = run(&[
        "certify",
        "--config",
        path_str(&cfg),
        "--set",
        "spikes.positions=[1.0]",
        "--set",
        "spikes.amplitudes=[2.0]",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["eta_v"]["curvature"].as_array().unwrap().len(), 1);
}

#[test]
fn criteria_sign_follows_certificate() {
    let good = run(&["criteria", "--config", path_str(&fixture("certify-laplace-valid.json"))]);
    assert_eq!(good.status.code(), Some(0));
    let v = stdout_json(&good);
    assert_eq!(v["determinant_positive"], Value::Bool(true));
    assert!(v["cramer_residuals"].as_array().unwrap().iter().all(|r| r.as_f64().unwrap() <= 1e-8));

    let dir = tempfile::tempdir().unwrap();
    let bad = run(&[
        "criteria",
        "--config",
        path_str(&fixture("certify-gauss-adversarial.json")),
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(bad.status.code(), Some(2));
    let csv = fs::read_to_string(dir.path().join("criteria.csv")).unwrap();
    assert!(csv.starts_with("t,D_V,eta_V,one_minus_eta\n"));
    // Wherever both quantities are clearly nonzero, D_V and 1 - eta share a sign.
    for line in csv.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        if f[1].abs() > 1e-9 && f[3].abs() > 1e-6 {
            assert_eq!(f[1] > 0.0, f[3] > 0.0, "row {line}");
        }
    }
}

#[test]
fn solve_recovers_noiseless_spikes() {
    let out = run(&["solve", "--config", path_str(&fixture("certify-laplace-valid.json"))]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    let pos: Vec<f64> = v["spikes"]["positions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert_eq!(pos.len(), 2);
    assert!((pos[0] - 1.0).abs() < 1e-3 && (pos[1] - 2.0).abs() < 1e-3, "{pos:?}");
}

#[test]
fn experiment_on_invalid_gaussian_misses_the_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "experiment",
        "--config",
        path_str(&fixture("certify-gauss-adversarial.json")),
        "--set",
        "experiment.noise_scales=[1e-6]",
        "--set",
        "experiment.trials=4",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("experiment.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("noise,trial,n_spikes,pos_err,amp_err,dual_gap"));
    let counts: Vec<usize> = lines.map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(counts.len(), 4);
    assert!(counts.iter().any(|&n| n != 2), "{counts:?}");
}

fn bundle(figure: &str) -> (tempfile::TempDir, Output) {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["reproduce", figure, "--out", path_str(dir.path())]);
    (dir, out)
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    v.sort();
    v
}

fn panels(out: &Output) -> Vec<(String, bool, bool)> {
    stdout_json(out)["panels"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| {
            (
                p["name"].as_str().unwrap().to_string(),
                p["expected_valid"].as_bool().unwrap(),
                p["valid"].as_bool().unwrap(),
            )
        })
        .collect()
}

#[test]
fn laplace_fig1_all_valid() {
    let (dir, out) = bundle("laplace-fig1");
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(csv_files(dir.path()).len(), 3);
    assert!(panels(&out).iter().all(|p| p.2));
    let readme = fs::read_to_string(dir.path().join("README.md")).unwrap();
    assert!(readme.contains("| k4 |"));
}

#[test]
fn gauss_fig2_sweeps_from_invalid_to_valid() {
    let (dir, out) = bundle("gauss-fig2");
    assert_eq!(out.status.code(), Some(0));
    let p = panels(&out);
    assert!(p.iter().all(|(_, e, a)| e == a));
    assert!(!p.first().unwrap().2);
    assert!(p.last().unwrap().2);
    let k4 = fs::read_to_string(dir.path().join("adversarial-k4.csv")).unwrap();
    assert_eq!(k4.lines().filter(|l| l.starts_with("sample,")).count(), 4);
    assert_eq!(k4.lines().filter(|l| l.starts_with("spike,")).count(), 2);
    assert_eq!(k4.lines().filter(|l| l.starts_with("eta,")).count(), 1201);
}

#[test]
fn gauss_fig3_confined_valid_wide_mixed() {
    let (_dir, out) = bundle("gauss-confined-fig3");
    assert_eq!(out.status.code(), Some(0));
    let p = panels(&out);
    assert!(p.iter().filter(|q| q.0.starts_with("confined")).all(|q| q.2));
    let wide: Vec<bool> = p.iter().filter(|q| q.0.starts_with("wide")).map(|q| q.2).collect();
    assert!(wide.contains(&true) && wide.contains(&false));
}

#[test]
fn reproduce_is_byte_identical() {
    let (a, _) = bundle("gauss-fig2");
    let (b, _) = bundle("gauss-fig2");
    let fa = csv_files(a.path());
    assert_eq!(fa.len(), 5);
    for f in fa.iter().map(|p| p.file_name().unwrap().to_owned()).chain(["README.md".into(), "summary.json".into()]) {
        assert_eq!(fs::read(a.path().join(&f)).unwrap(), fs::read(b.path().join(&f)).unwrap(), "{f:?}");
    }
}
