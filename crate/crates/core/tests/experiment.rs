use std::fs;
use std::path::Path;

use leocoopbf::experiment::runner::{SUMMARY_HEADER, SWEEP_HEADER, TRACE_HEADER};
use leocoopbf::experiment::{cmd_simulate, cmd_sweep, ExperimentConfig, SolverKind, SweepAxis};

fn small() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_json(
        r#"{
            "geometry": {"serving_count": 3, "ut_count": 6},
            "channel": {"arrays": {"n_h": 2, "n_v": 2}},
            "scheduler": {"kind": "cs", "u_max": 3},
            "solvers": ["centralized", "decentralized", "mrt", "zf", "sss"],
            "topology": {"kind": "ring"},
            "n_drops": 2,
            "seed": 17
        }"#,
    )
    .unwrap();
    cfg.tolerances.decentralized.max_outer = 200;
    cfg
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for sub in ["", "traces"] {
        let d = dir.join(sub);
        let mut names: Vec<_> = fs::read_dir(&d)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.is_file())
            .collect();
        names.sort();
        for p in names {
            out.push((
                p.strip_prefix(dir).unwrap().display().to_string(),
                fs::read(&p).unwrap(),
            ));
        }
    }
    out
}

#[test]
fn simulate_writes_traces_summary_and_metadata() {
    let cfg = small();
    let dir = tempfile::tempdir().unwrap();
    let records = cmd_simulate(&cfg, dir.path()).unwrap();
    assert_eq!(records.len(), 2 * 5);
    assert!(records.iter().all(|r| r.ok()));

    assert_eq!(header(&dir.path().join("summary.csv")), SUMMARY_HEADER.join(","));
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + records.len());

    for r in &records {
        let trace = dir.path().join(r.trace_file.as_ref().unwrap());
        assert_eq!(header(&trace), TRACE_HEADER.join(","));
        let rows = fs::read_to_string(&trace).unwrap().lines().count() - 1;
        match r.solver {
            SolverKind::Mrt | SolverKind::Zf | SolverKind::Sss => assert_eq!(rows, 1),
            _ => assert_eq!(rows, r.iterations.unwrap() + 1),
        }
    }

    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("runs.json")).unwrap()).unwrap();
    assert_eq!(meta["config_hash"], cfg.hash());
    assert_eq!(meta["records"].as_array().unwrap().len(), records.len());
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = small();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    cmd_simulate(&cfg, a.path()).unwrap();
    cmd_simulate(&cfg, b.path()).unwrap();
    assert_eq!(
        read_dir_sorted(a.path())
            .into_iter()
            .filter(|(n, _)| n != "runs.json")
            .collect::<Vec<_>>(),
        read_dir_sorted(b.path())
            .into_iter()
            .filter(|(n, _)| n != "runs.json")
            .collect::<Vec<_>>()
    );
}

#[test]
fn seed_changes_results() {
    let cfg = small();
    let mut other = cfg.clone();
    other.seed = 18;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = cmd_simulate(&cfg, a.path()).unwrap();
    let rb = cmd_simulate(&other, b.path()).unwrap();
    assert_ne!(ra[0].sum_rate_bps_hz, rb[0].sum_rate_bps_hz);
}

#[test]
fn infeasible_scene_becomes_failed_rows() {
    let mut cfg = small();
    cfg.geometry.serving_count = 200;
    cfg.solvers = vec![SolverKind::Mrt, SolverKind::Centralized];
    let dir = tempfile::tempdir().unwrap();
    let records = cmd_simulate(&cfg, dir.path()).unwrap();
    assert_eq!(records.len(), 4);
    assert!(records.iter().all(|r| !r.ok() && r.status.starts_with("failed")));
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
}

#[test]
fn sweep_reports_every_value_and_solver() {
    let mut cfg = small();
    cfg.solvers = vec![SolverKind::Mrt, SolverKind::Decentralized];
    let dir = tempfile::tempdir().unwrap();
    let out = cmd_sweep(&cfg, SweepAxis::PowerDbm, &[40.0, 50.0], dir.path()).unwrap();
    assert_eq!(out.rows.len(), 4);
    assert_eq!(out.failures, 0);
    assert_eq!(out.runs, 2 * 2 * 2);
    let csv = dir.path().join("sweep_power_dbm.csv");
    assert_eq!(header(&csv), SWEEP_HEADER.join(","));
    assert!(dir.path().join("sweep_power_dbm.json").exists());
    let mrt: Vec<f64> = out
        .rows
        .iter()
        .filter(|r| r.solver == "mrt")
        .map(|r| r.mean_sum_rate_bps_hz.unwrap())
        .collect();
    assert!(mrt[1] > mrt[0]);
    let dec = out.rows.iter().find(|r| r.solver == "decentralized").unwrap();
    assert!(dec.overhead_formula_max.unwrap() > 0.0);
    assert_eq!(dec.overhead_formula_total, dec.overhead_counted_total);
}

#[test]
fn sweep_rejects_bad_values() {
    let cfg = small();
    let dir = tempfile::tempdir().unwrap();
    assert!(cmd_sweep(&cfg, SweepAxis::NAntennas, &[8.0], dir.path()).is_err());
    assert!(cmd_sweep(&cfg, SweepAxis::NUts, &[], dir.path()).is_err());
}
