use std::fs;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_leocoopbf"))
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL: &str = r#"{
    "geometry": {"serving_count": 3, "ut_count": 6},
    "channel": {"arrays": {"n_h": 2, "n_v": 2}},
    "scheduler": {"u_max": 3},
    "solvers": ["decentralized", "mrt"],
    "topology": {"kind": "star"},
    "sweep": {"axis": "n_uts", "values": [4, 6]},
    "n_drops": 2,
    "seed": 3
}"#;

#[test]
fn validate_quick_passes() {
    let o = bin().arg("validate").output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("checks passed"));
}

#[test]
fn validate_flags_zero_penalty() {
    let o = bin().args(["validate", "--rho-g", "0"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.contains("FAIL local.q_positive_definite"), "{text}");
}

#[test]
fn simulate_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("run");
    let o = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .env("LEOCOOPBF_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("summary.csv").exists());
    assert!(out.join("runs.json").exists());
    assert!(out.join("traces/drop0001_decentralized.csv").exists());
}

#[test]
fn sweep_uses_config_axis_by_default() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, SMALL).unwrap();
    let o = bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("sweep_n_uts.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2);
}

#[test]
fn bad_inputs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, SMALL).unwrap();
    let o = bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .args(["--axis", "users", "--values", "1"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"n_drop": 2}"#).unwrap();
    let o = bin().args(["simulate", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_drop"));

    let o = bin()
        .args(["simulate", "--config"])
        .arg(dir.path().join("missing.json"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
