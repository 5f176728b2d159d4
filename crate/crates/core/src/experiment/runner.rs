//! Drops, solver runs, traces and sweeps.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, SolverKind, SweepAxis};
use crate::baselines::{mrt, sss, zf};
use crate::beamformer::BeamformerSet;
use crate::centralized::run_centralized;
use crate::channel::{build_csi, dbm_to_watts, StatisticalCsi};
use crate::decentralized::{build_topology, overhead_report, run_decentralized};
use crate::geometry::{build_scene, compute_aods};
use crate::rates::{compute_beam_gains, sum_rate, wmmse_value};
use crate::scheduling::{schedule_cs, schedule_rs, SchedulerKind, SchedulingMask};
use crate::{Error, Result};

/// Header of every per-run trace file.
pub const TRACE_HEADER: [&str; 5] = [
    "iter",
    "sum_rate_bps_hz",
    "wmmse_objective",
    "primal_residual",
    "overhead_cumulative",
];

/// Header of `summary.csv`.
pub const SUMMARY_HEADER: [&str; 10] = [
    "drop",
    "solver",
    "topology",
    "status",
    "sum_rate_bps_hz",
    "iterations",
    "converged",
    "overhead_per_iteration",
    "overhead_cumulative",
    "trace_file",
];

/// Header of `sweep_<axis>.csv`.
pub const SWEEP_HEADER: [&str; 14] = [
    "axis",
    "value",
    "solver",
    "topology",
    "n_drops",
    "n_ok",
    "mean_sum_rate_bps_hz",
    "stderr_sum_rate_bps_hz",
    "mean_iterations",
    "converged_fraction",
    "overhead_formula_max",
    "overhead_counted_max",
    "overhead_formula_total",
    "overhead_counted_total",
];

/// RNG of one drop. All values of one sweep axis share the streams, so
/// sweep points are compared on the same drops.
pub fn drop_rng(seed: u64, drop: usize, axis_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((axis_index << 32) | drop as u64);
    rng
}

/// Everything a solver needs for one drop.
#[derive(Debug, Clone)]
pub struct Drop {
    pub csi: StatisticalCsi,
    pub mask: SchedulingMask,
    pub budgets: Vec<f64>,
}

/// Scene, CSI and schedule for one drop.
pub fn build_drop(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<Drop> {
    let scene = build_scene(&cfg.geometry, rng)?;
    let aods = compute_aods(&scene)?;
    let csi = build_csi(&scene, &aods, &cfg.channel, rng)?;
    let u_max = cfg.scheduler.u_max.min(csi.n_users());
    let mask = match cfg.scheduler.kind {
        SchedulerKind::Cs => schedule_cs(&csi, u_max)?,
        SchedulerKind::Rs => schedule_rs(csi.n_sats(), csi.n_users(), u_max, rng)?,
    };
    let budgets = vec![dbm_to_watts(cfg.power_budget_dbm); csi.n_sats()];
    Ok(Drop { csi, mask, budgets })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub sum_rate_bps_hz: f64,
    pub wmmse_objective: f64,
    pub primal_residual: f64,
    pub overhead_cumulative: u64,
}

/// Per-satellite overhead of a decentralized run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OverheadTotals {
    pub formula: Vec<u64>,
    pub counted: Vec<u64>,
    pub cumulative: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverOutcome {
    pub solver: SolverKind,
    pub sum_rate: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceRow>,
    pub overhead: Option<OverheadTotals>,
    pub wall_time_s: f64,
}

fn single_row(csi: &StatisticalCsi, mask: &SchedulingMask, w: &BeamformerSet) -> Result<TraceRow> {
    let g = compute_beam_gains(csi, mask, w)?;
    Ok(TraceRow {
        iter: 0,
        sum_rate_bps_hz: sum_rate(&g, csi),
        wmmse_objective: wmmse_value(&g, csi),
        primal_residual: 0.0,
        overhead_cumulative: 0,
    })
}

/// Runs one solver or baseline on a drop.
pub fn run_solver(kind: SolverKind, drop: &Drop, cfg: &ExperimentConfig) -> Result<SolverOutcome> {
    let start = Instant::now();
    let Drop { csi, mask, budgets } = drop;
    let tol = &cfg.tolerances;
    let (trace, iterations, converged, overhead) = match kind {
        SolverKind::Centralized => {
            let (_, rep) = run_centralized(csi, mask, budgets, &tol.centralized)?;
            let trace = rep
                .sum_rate_trace
                .iter()
                .zip(&rep.objective_trace)
                .enumerate()
                .map(|(iter, (&r, &o))| TraceRow {
                    iter,
                    sum_rate_bps_hz: r,
                    wmmse_objective: o,
                    primal_residual: 0.0,
                    overhead_cumulative: 0,
                })
                .collect();
            (trace, rep.iterations, rep.converged, None)
        }
        SolverKind::Decentralized => {
            let topo = build_topology(&cfg.topology, csi.n_sats())?;
            let (_, rep, ledger) = run_decentralized(csi, mask, budgets, &topo, &tol.decentralized)?;
            let rows = overhead_report(&ledger, &topo, mask)?;
            let trace = (0..rep.sum_rate_trace.len())
                .map(|iter| TraceRow {
                    iter,
                    sum_rate_bps_hz: rep.sum_rate_trace[iter],
                    wmmse_objective: rep.objective_trace[iter],
                    primal_residual: rep.primal_residual_trace[iter],
                    overhead_cumulative: ledger.history[iter],
                })
                .collect();
            let overhead = OverheadTotals {
                formula: rows.iter().map(|r| r.formula).collect(),
                counted: rows.iter().map(|r| r.counted).collect(),
                cumulative: rows.iter().map(|r| r.cumulative).collect(),
            };
            (trace, rep.iterations, rep.converged, Some(overhead))
        }
        SolverKind::Mrt => (vec![single_row(csi, mask, &mrt(csi, mask, budgets)?)?], 0, true, None),
        SolverKind::Zf => (vec![single_row(csi, mask, &zf(csi, mask, budgets)?)?], 0, true, None),
        SolverKind::Sss => {
            let (w, single) = sss(csi, mask, budgets, &tol.centralized)?;
            (vec![single_row(csi, &single, &w)?], 0, true, None)
        }
    };
    let sum_rate = trace.last().map_or(0.0, |r: &TraceRow| r.sum_rate_bps_hz);
    Ok(SolverOutcome {
        solver: kind,
        sum_rate,
        iterations,
        converged,
        trace,
        overhead,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Builds drop `drop` and runs every configured solver on it. The outer
/// error is a scene failure; inner errors are per-solver failures.
pub fn run_drop(
    cfg: &ExperimentConfig,
    drop: usize,
    axis_index: u64,
) -> std::result::Result<Vec<Result<SolverOutcome>>, Error> {
    let mut rng = drop_rng(cfg.seed, drop, axis_index);
    let d = build_drop(cfg, &mut rng)?;
    Ok(cfg.solvers.iter().map(|&k| run_solver(k, &d, cfg)).collect())
}

/// Metadata of one (drop, solver) run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub seed: u64,
    pub drop: usize,
    pub solver: SolverKind,
    pub topology: String,
    pub status: String,
    pub sum_rate_bps_hz: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub trace_file: Option<PathBuf>,
    pub overhead: Option<OverheadTotals>,
    pub wall_time_s: Option<f64>,
}

impl RunRecord {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Serialize)]
struct SummaryRow<'a> {
    drop: usize,
    solver: &'static str,
    topology: &'a str,
    status: &'a str,
    sum_rate_bps_hz: Option<f64>,
    iterations: Option<usize>,
    converged: Option<bool>,
    overhead_per_iteration: Option<u64>,
    overhead_cumulative: Option<u64>,
    trace_file: String,
}

fn topology_label(cfg: &ExperimentConfig, kind: SolverKind) -> String {
    match kind {
        SolverKind::Decentralized => cfg.topology.name().to_string(),
        _ => String::new(),
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_error)
}

/// Writes a trace to `path` with the [`TRACE_HEADER`] columns.
pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(TRACE_HEADER).map_err(csv_error)?;
    for r in rows {
        w.serialize((
            r.iter,
            r.sum_rate_bps_hz,
            r.wmmse_objective,
            r.primal_residual,
            r.overhead_cumulative,
        ))
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct RunMetadata<'a, T: Serialize> {
    config_hash: String,
    config: &'a ExperimentConfig,
    records: &'a [T],
}

/// Runs every drop of the configuration and writes
/// `traces/drop<d>_<solver>.csv`, `summary.csv` and `runs.json` under `out`.
pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let hash = cfg.hash();
    let results: Vec<_> = (0..cfg.n_drops).into_par_iter().map(|d| run_drop(cfg, d, 0)).collect();

    fs::create_dir_all(out.join("traces"))?;
    let mut records = Vec::new();
    for (d, res) in results.into_iter().enumerate() {
        let per_solver: Vec<Result<SolverOutcome>> = match res {
            Ok(v) => v,
            Err(e) => {
                log::warn!("drop {d}: {e}");
                let msg = e.to_string();
                cfg.solvers
                    .iter()
                    .map(|_| Err(Error::InfeasibleScene(msg.clone())))
                    .collect()
            }
        };
        for (&kind, outcome) in cfg.solvers.iter().zip(per_solver) {
            let mut rec = RunRecord {
                config_hash: hash.clone(),
                seed: cfg.seed,
                drop: d,
                solver: kind,
                topology: topology_label(cfg, kind),
                status: "ok".into(),
                sum_rate_bps_hz: None,
                iterations: None,
                converged: None,
                trace_file: None,
                overhead: None,
                wall_time_s: None,
            };
            match outcome {
                Ok(o) => {
                    let rel = PathBuf::from("traces").join(format!("drop{d:04}_{}.csv", kind.name()));
                    write_trace(&out.join(&rel), &o.trace)?;
                    rec.sum_rate_bps_hz = Some(o.sum_rate);
                    rec.iterations = Some(o.iterations);
                    rec.converged = Some(o.converged);
                    rec.trace_file = Some(rel);
                    rec.overhead = o.overhead;
                    rec.wall_time_s = Some(o.wall_time_s);
                }
                Err(e) => {
                    log::warn!("drop {d}, {}: {e}", kind.name());
                    rec.status = format!("failed: {e}");
                }
            }
            records.push(rec);
        }
    }

    let mut w = writer(&out.join("summary.csv"))?;
    w.write_record(SUMMARY_HEADER).map_err(csv_error)?;
    for r in &records {
        let ovh = r.overhead.as_ref();
        w.serialize(SummaryRow {
            drop: r.drop,
            solver: r.solver.name(),
            topology: &r.topology,
            status: &r.status,
            sum_rate_bps_hz: r.sum_rate_bps_hz,
            iterations: r.iterations,
            converged: r.converged,
            overhead_per_iteration: ovh.map(|o| o.counted.iter().sum()),
            overhead_cumulative: ovh.map(|o| o.cumulative.iter().sum()),
            trace_file: r
                .trace_file
                .as_ref()
                .map(|p| p.to_string_lossy().into_owned())
                .unwrap_or_default(),
        })
        .map_err(csv_error)?;
    }
    w.flush()?;
    let meta = RunMetadata {
        config_hash: hash,
        config: cfg,
        records: &records,
    };
    fs::write(out.join("runs.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(records)
}

/// One row of a sweep summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: &'static str,
    pub value: f64,
    pub solver: &'static str,
    pub topology: String,
    pub n_drops: usize,
    pub n_ok: usize,
    pub mean_sum_rate_bps_hz: Option<f64>,
    pub stderr_sum_rate_bps_hz: Option<f64>,
    pub mean_iterations: Option<f64>,
    pub converged_fraction: Option<f64>,
    /// Mean over drops of the largest per-satellite value.
    pub overhead_formula_max: Option<f64>,
    pub overhead_counted_max: Option<f64>,
    /// Mean over drops of the network-wide sum.
    pub overhead_formula_total: Option<f64>,
    pub overhead_counted_total: Option<f64>,
}

/// Sample mean and standard error; the error is zero for fewer than two samples.
pub fn mean_stderr(x: &[f64]) -> Option<(f64, f64)> {
    if x.is_empty() {
        return None;
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return Some((mean, 0.0));
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, (var / n).sqrt()))
}

fn mean(x: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = x.collect();
    mean_stderr(&v).map(|(m, _)| m)
}

/// Result of [`cmd_sweep`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub failures: usize,
    pub runs: usize,
}

/// Runs `n_drops` drops at every axis value and writes `sweep_<axis>.csv`
/// and `sweep_<axis>.json` under `out`.
pub fn cmd_sweep(cfg: &ExperimentConfig, axis: SweepAxis, values: &[f64], out: &Path) -> Result<SweepOutput> {
    cfg.validate()?;
    if values.is_empty() {
        return Err(Error::config("sweep.values", "must not be empty"));
    }
    let configs = values
        .iter()
        .map(|&v| cfg.with_axis(axis, v))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..values.len())
        .flat_map(|a| (0..cfg.n_drops).map(move |d| (a, d)))
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(a, d)| run_drop(&configs[a], d, axis.index()))
        .collect();

    let mut rows = Vec::new();
    let mut failures = 0;
    let mut runs = 0;
    for (a, &value) in values.iter().enumerate() {
        let c = &configs[a];
        for (k, &kind) in c.solvers.iter().enumerate() {
            let mut ok = Vec::new();
            for ((ja, jd), res) in jobs.iter().zip(&results) {
                if *ja != a {
                    continue;
                }
                runs += 1;
                match res {
                    Ok(v) => match &v[k] {
                        Ok(o) => ok.push(o),
                        Err(e) => {
                            failures += 1;
                            log::warn!("{}={value}, drop {jd}, {}: {e}", axis.name(), kind.name());
                        }
                    },
                    Err(e) => {
                        failures += 1;
                        log::warn!("{}={value}, drop {jd}: {e}", axis.name());
                    }
                }
            }
            let rates: Vec<f64> = ok.iter().map(|o| o.sum_rate).collect();
            let stats = mean_stderr(&rates);
            let ovh: Vec<&OverheadTotals> = ok.iter().filter_map(|o| o.overhead.as_ref()).collect();
            let max_of = |v: &Vec<u64>| v.iter().copied().max().unwrap_or(0) as f64;
            let sum_of = |v: &Vec<u64>| v.iter().sum::<u64>() as f64;
            rows.push(SweepRow {
                axis: axis.name(),
                value,
                solver: kind.name(),
                topology: topology_label(c, kind),
                n_drops: c.n_drops,
                n_ok: ok.len(),
                mean_sum_rate_bps_hz: stats.map(|s| s.0),
                stderr_sum_rate_bps_hz: stats.map(|s| s.1),
                mean_iterations: mean(ok.iter().map(|o| o.iterations as f64)),
                converged_fraction: mean(ok.iter().map(|o| if o.converged { 1.0 } else { 0.0 })),
                overhead_formula_max: mean(ovh.iter().map(|o| max_of(&o.formula))),
                overhead_counted_max: mean(ovh.iter().map(|o| max_of(&o.counted))),
                overhead_formula_total: mean(ovh.iter().map(|o| sum_of(&o.formula))),
                overhead_counted_total: mean(ovh.iter().map(|o| sum_of(&o.counted))),
            });
        }
    }

    fs::create_dir_all(out)?;
    let mut w = writer(&out.join(format!("sweep_{}.csv", axis.name())))?;
    w.write_record(SWEEP_HEADER).map_err(csv_error)?;
    for r in &rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    let meta = RunMetadata {
        config_hash: cfg.hash(),
        config: cfg,
        records: &rows,
    };
    fs::write(
        out.join(format!("sweep_{}.json", axis.name())),
        serde_json::to_string_pretty(&meta)?,
    )?;
    Ok(SweepOutput { rows, failures, runs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn mean_and_standard_error() {
        assert_eq!(mean_stderr(&[]), None);
        assert_eq!(mean_stderr(&[2.0]), Some((2.0, 0.0)));
        let (m, se) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn drop_streams_are_independent_and_reproducible() {
        let a: u64 = drop_rng(7, 0, 0).random();
        let b: u64 = drop_rng(7, 1, 0).random();
        let c: u64 = drop_rng(7, 0, 1).random();
        let d: u64 = drop_rng(8, 0, 0).random();
        assert_eq!(a, drop_rng(7, 0, 0).random::<u64>());
        assert!(a != b && a != c && a != d && b != c);
    }

    #[test]
    fn mrt_trace_is_a_single_row() {
        let mut cfg = ExperimentConfig::default();
        cfg.geometry.serving_count = 2;
        cfg.geometry.ut_count = 3;
        cfg.channel.arrays.n_h = 2;
        cfg.channel.arrays.n_v = 1;
        let drop = build_drop(&cfg, &mut drop_rng(0, 0, 0)).unwrap();
        let o = run_solver(SolverKind::Mrt, &drop, &cfg).unwrap();
        assert_eq!(o.trace.len(), 1);
        assert_eq!(o.trace[0].iter, 0);
        assert_eq!(o.sum_rate, o.trace[0].sum_rate_bps_hz);
        assert!(o.overhead.is_none());
    }
}
