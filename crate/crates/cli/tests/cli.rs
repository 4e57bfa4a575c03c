use std::path::PathBuf;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../config").join(name)
}

fn skyway(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skyway")).args(args).output().expect("binary runs")
}

fn digest(out: &Output) -> String {
    hex::encode(Sha256::digest(&out.stdout))
}

#[test]
fn validate_accepts_shipped_scenario() {
    let out = skyway(&["validate", config("case_study.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok: converging-case-study"));
}

#[test]
fn invalid_scenario_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "bogus = 1\n").unwrap();
    for cmd in ["validate", "run"] {
        let out = skyway(&[cmd, path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(1), "{cmd}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
    }
    let text = std::fs::read_to_string(config("case_study.toml")).unwrap().replace("dt = 0.1", "dt = -0.1");
    std::fs::write(&path, text).unwrap();
    let out = skyway(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dt"));
    let out = skyway(&["validate", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(skyway(&["run"]).status.code(), Some(1));
    assert_eq!(skyway(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(skyway(&["--help"]).status.code(), Some(0));
}

#[test]
fn run_is_byte_identical_for_the_same_seed() {
    let scenario = config("case_study.toml");
    let s = scenario.to_str().unwrap();
    let a = skyway(&["run", s, "--seed", "5"]);
    let b = skyway(&["run", s, "--seed", "5"]);
    let c = skyway(&["run", s, "--seed", "6"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(digest(&a), digest(&b));
    assert_ne!(digest(&a), digest(&c));
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.lines().next().unwrap().contains(r#""type":"header""#));
    assert!(text.lines().last().unwrap().contains(r#""type":"result""#));
}

#[test]
fn sweep_is_byte_identical_for_the_same_seed() {
    let s = config("case_study.toml");
    let args = ["sweep-envelope", s.to_str().unwrap(), "--margins", "5,20", "--counts", "2,4", "--trials", "6", "--seed", "9"];
    let a = skyway(&args);
    let b = skyway(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(digest(&a), digest(&b));
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.starts_with("margin_m,count,trials,successes,probability"));
    let zero = skyway(&["sweep-envelope", s.to_str().unwrap(), "--margins", "5", "--counts", "2", "--trials", "0"]);
    assert_eq!(zero.status.code(), Some(1));
}

#[test]
fn link_metrics_lists_four_modes() {
    let a = skyway(&["link-metrics", config("monitoring_modes.toml").to_str().unwrap()]);
    let b = skyway(&["link-metrics", config("monitoring_modes.toml").to_str().unwrap()]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let modes: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(modes, ["RID", "FiveG_A", "ADSB", "SAT"]);
    assert!(text.contains("FiveG_A,3500,4,100,"));
}

#[test]
fn evaluate_reports_a_composite_score() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("run.ndjson");
    let run = skyway(&["run", config("case_study.toml").to_str().unwrap(), "--seed", "3"]);
    std::fs::write(&log, &run.stdout).unwrap();
    let weights = config("weights.toml");
    let args = ["evaluate", log.to_str().unwrap(), weights.to_str().unwrap()];
    let a = skyway(&args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, skyway(&args).stdout);
    let report: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    let score = report["composite_score"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&score));
    assert_eq!(report["consistent"], serde_json::Value::Bool(true));
    let groups: Vec<f64> =
        report["weights"]["groups"]["weights"].as_array().unwrap().iter().map(|w| w.as_f64().unwrap()).collect();
    assert!((groups.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(groups[2] > groups[0] && groups[2] > groups[1], "safety weighted highest");

    std::fs::write(&log, "not json\n").unwrap();
    assert_eq!(skyway(&args).status.code(), Some(1));
}
