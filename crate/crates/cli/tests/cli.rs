use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bohmfield"));
    c.env_remove("BOHMFIELD_VERBOSE");
    c
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn kinds(stdout: &[u8]) -> Vec<String> {
    String::from_utf8_lossy(stdout)
        .lines()
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            v["kind"].as_str().unwrap().to_string()
        })
        .collect()
}

#[test]
fn run_writes_header_then_leaves() {
    let out = run(&["run", config("dynamic.toml").to_str().unwrap(), "--steps", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let kinds = kinds(&out.stdout);
    assert_eq!(kinds.len(), 7);
    assert_eq!(kinds[0], "header");
    assert!(kinds[1..].iter().all(|k| k == "leaf"));
}

#[test]
fn output_is_deterministic() {
    let path = config("dynamic.toml");
    let a = run(&["run", path.to_str().unwrap(), "--steps", "10"]);
    let b = run(&["run", path.to_str().unwrap(), "--steps", "10"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn collapse_ends_with_error_record_and_status_4() {
    let out = run(&["run", config("crossing.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    let kinds = kinds(&out.stdout);
    assert_eq!(kinds.last().unwrap(), "error");
    assert!(kinds.iter().any(|k| k == "leaf"));
}

#[test]
fn csv_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.csv");
    let out = run(&[
        "run",
        config("vacuum.toml").to_str().unwrap(),
        "--steps",
        "3",
        "--csv",
        "--out",
        file.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let mut reader = csv::Reader::from_path(&file).unwrap();
    let header = reader.headers().unwrap().clone();
    assert_eq!(&header[0], "step");
    assert!(header.iter().any(|h| h == "phi_31"));
    assert_eq!(reader.records().count(), 4);
}

#[test]
fn resume_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = config("dynamic.toml");
    let partial = dir.path().join("partial.jsonl");
    let out = run(&["run", path.to_str().unwrap(), "--steps", "10", "--out", partial.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let resumed = run(&["run", path.to_str().unwrap(), "--steps", "20", "--resume", partial.to_str().unwrap()]);
    assert_eq!(resumed.status.code(), Some(0));
    let full = run(&["run", path.to_str().unwrap(), "--steps", "20"]);

    let leaves = |bytes: &[u8]| -> Vec<serde_json::Value> {
        String::from_utf8_lossy(bytes)
            .lines()
            .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
            .filter(|v| v["kind"] == "leaf")
            .collect()
    };
    let (full, resumed) = (leaves(&full.stdout), leaves(&resumed.stdout));
    assert_eq!(resumed.len(), 11);
    for (a, b) in full[10..].iter().zip(&resumed) {
        assert_eq!(a["step"], b["step"]);
        for (x, y) in a["phi"].as_array().unwrap().iter().zip(b["phi"].as_array().unwrap()) {
            assert!((x.as_f64().unwrap() - y.as_f64().unwrap()).abs() < 1e-12);
        }
    }
}

#[test]
fn modes_lists_every_frequency() {
    let out = run(&["modes", config("vacuum.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 32);
    assert!((lines[0]["omega"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let out = run(&["modes", config("vacuum.toml").to_str().unwrap(), "--csv"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 33);
}

#[test]
fn selfcheck_passes_and_negative_control_fails() {
    let out = run(&["selfcheck"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 10);

    let out = run(&["selfcheck", "--perturb-k", "1e-6"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL self_adjointness"));
}

#[test]
fn small_ensemble_warns() {
    let out = run(&["ensemble", config("vacuum.toml").to_str().unwrap(), "--samples", "200", "--seed", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["samples"], 200);
    assert!(report["warning"].is_string());
    assert!(String::from_utf8_lossy(&out.stderr).contains("WARN"));
}

#[test]
fn ensemble_on_dynamic_foliation_is_unsupported() {
    let out = run(&["ensemble", config("dynamic.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "sites = 3\ndx = -1.0\nmass = 1.0\nd_epsilon = 0.1\n").unwrap();
    assert_eq!(run(&["run", bad.to_str().unwrap()]).status.code(), Some(2));
    let missing = dir.path().join("missing.toml");
    assert_eq!(run(&["run", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn verbose_level_two_adds_wall_clock() {
    let out = bin()
        .env("BOHMFIELD_VERBOSE", "2")
        .args(["run", config("vacuum.toml").to_str().unwrap(), "--steps", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().skip(1).all(|l| l.contains("wall_clock_s")));
}
