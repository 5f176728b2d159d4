//! Self-validation suite run by `leocoopbf validate`.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{ExperimentConfig, SolverKind};
use super::runner::run_drop;
use super::synthetic::{random_csi, random_mask, random_state, random_vector};
use crate::centralized::{run_centralized, CentralizedOptions};
use crate::channel::{build_csi, derive_statistics, StatisticalCsi};
use crate::decentralized::{build_topology, run_decentralized, DecentralizedOptions, TopologyKind};
use crate::geometry::{build_scene, build_walker_delta, compute_aods, GeometryConfig};
use crate::local_solver::oracle::{dense_ball, dense_g_solve};
use crate::local_solver::{
    assemble_reduced, build_operators, eliminate_g, generic_local_oracle, local_lagrangian, solve_ball_constrained,
    solve_local,
};
use crate::rates::{compute_beam_gains, monte_carlo_rate, rate_lower_bound};
use crate::scheduling::{schedule_cs, SchedulingMask};
use crate::{BeamformerSet, CMat, CVec, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Quick,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub wall_time_s: f64,
}

/// Knobs for fault injection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidateOptions {
    pub level: Level,
    /// Dimensionless consensus penalty used by the copy-update checks.
    pub rho_g: f64,
    pub seed: u64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            level: Level::Quick,
            rho_g: 1.0,
            seed: 0,
        }
    }
}

type Check = fn(&ValidateOptions) -> Result<std::result::Result<String, String>>;

fn quick_checks() -> Vec<(&'static str, Check)> {
    vec![
        ("geometry.walker_shell", walker_shell),
        ("channel.rician_moments", rician_moments),
        ("local.q_positive_definite", q_positive_definite),
        ("local.elimination_matches_dense", elimination_matches_dense),
        ("local.ball_matches_dense", ball_matches_dense),
        ("centralized.monotone_and_feasible", centralized_monotone),
        ("decentralized.overhead_counts", overhead_counts),
        ("experiment.deterministic_drop", deterministic_drop),
    ]
}

fn full_checks() -> Vec<(&'static str, Check)> {
    vec![
        ("rates.hardening_bound", hardening_bound),
        ("local.reduced_gradient", reduced_gradient),
        ("local.solve_matches_oracle", solve_matches_oracle),
        ("decentralized.matches_centralized", decentralized_matches_centralized),
    ]
}

/// Runs the suite; the report lists every check in order.
pub fn cmd_validate(opts: &ValidateOptions) -> Vec<CheckResult> {
    let mut checks = quick_checks();
    if opts.level == Level::Full {
        checks.extend(full_checks());
    }
    checks
        .into_iter()
        .map(|(name, f)| {
            let start = Instant::now();
            let (passed, detail) = match f(opts) {
                Ok(Ok(d)) => (true, d),
                Ok(Err(d)) => (false, d),
                Err(e) => (false, format!("error: {e}")),
            };
            CheckResult {
                name,
                passed,
                detail,
                wall_time_s: start.elapsed().as_secs_f64(),
            }
        })
        .collect()
}

fn verdict(ok: bool, detail: String) -> Result<std::result::Result<String, String>> {
    Ok(if ok { Ok(detail) } else { Err(detail) })
}

fn rng(opts: &ValidateOptions, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(opts.seed);
    r.set_stream(stream);
    r
}

fn walker_shell(_: &ValidateOptions) -> Result<std::result::Result<String, String>> {
    let cfg = GeometryConfig::default();
    let c = build_walker_delta(&cfg)?;
    let r = cfg.orbit_radius_km();
    let worst = c.positions.iter().map(|p| (p.norm() - r).abs()).fold(0.0, f64::max);
    let n = cfg.planes * cfg.sats_per_plane;
    verdict(
        c.len() == n && worst < 1e-6,
        format!("{} satellites (expected {n}), radius error {worst:.1e} km", c.len()),
    )
}

fn rician_moments(_: &ValidateOptions) -> Result<std::result::Result<String, String>> {
    let mut worst: f64 = 0.0;
    for &gamma in &[1e-12, 1.0, 3.5] {
        for &kappa in &[0.5, 10.0, 100.0] {
            let (a, b) = derive_statistics(gamma, kappa);
            worst = worst.max((2.0 * a * a + 2.0 * b - gamma).abs() / gamma);
            worst = worst.max((a * a / b - kappa).abs() / kappa);
        }
    }
    verdict(worst < 1e-12, format!("largest relative moment error {worst:.1e}"))
}

fn instance(
    opts: &ValidateOptions,
    stream: u64,
    n_sats: usize,
    n_users: usize,
    n_ant: usize,
) -> Result<(StatisticalCsi, SchedulingMask, ChaCha8Rng)> {
    let mut r = rng(opts, stream);
    let csi = random_csi(n_sats, n_ant, n_users, &mut r)?;
    let load = r.random_range(1..=n_users);
    let mask = random_mask(n_sats, n_users, load, &mut r)?;
    Ok((csi, mask, r))
}

fn q_positive_definite(opts: &ValidateOptions) -> Result<std::result::Result<String, String>> {
    let mut smallest = f64::INFINITY;
    for k in 0..10 {
        let (csi, mask, mut r) = instance(opts, 100 + k, 3, 3, 2)?;
        let mut st = random_state(&csi, &mask, 0, 1.0, &mut r)?;
        st.rho = opts.rho_g;
        let ops = match build_operators(&st, &csi, &mask) {
            Ok(o) => o,
            Err(e) => return verdict(false, format!("instance {k}: {e}")),
        };
        for u in 0..csi.n_users() {
            for l in 0..csi.n_users() {
                let q = &ops.pair(u, l).q;
                let min = q.clone().symmetric_eigenvalues().min();
                let margin = ops.penalty * (1.0 - 1e-9);
                if !(min >= margin && margin > 0.0) {
                    return verdict(
                        false,
                        format!("instance {k}, pair ({u}, {l}): smallest eigenvalue {min:.3e}, required {margin:.3e}"),
                    );
                }
                smallest = smallest.min(min);
            }
        }
    }
    verdict(true, format!("smallest eigenvalue {smallest:.3e}"))
}

fn elimination_matches_dense(opts: &ValidateOptions) -> Result<std::result::Result<String, String>> {
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let n_sats = [2, 3, 5][k as usize % 3];
        let (csi, mask, mut r) = instance(opts, 200 + k, n_sats, 1 + k as usize % 4, 3)?;
        let sat = r.random_range(0..n_sats);
        let st = random_state(&csi, &mask, sat, opts.rho_g.max(1e-3), &mut r)?;
        let fast = eliminate_g(&st, &csi, &mask, &st.w)?;
        let dense = dense_g_solve(&st, &csi, &mask, &st.w)?;
        let scale = dense
            .as_slice()
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
            .max(1e-300);
        worst = worst.max(fast.max_abs_diff(&dense) / scale);
    }
    verdict(worst < 1e-10, format!("largest relative difference {worst:.1e}"))
}

fn ball_matches_dense(opts: &ValidateOptions) -> Result<std::result::Result<String, String>> {
    let mut r = rng(opts, 300);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = r.random_range(1..=6);
        let a = CMat::from_fn(n, n, |_, _| super::synthetic::complex_normal(&mut r));
        let theta = &a * a.adjoint();
        let xi = random_vector(n, &mut r) * C64::new(r.random_range(0.1..10.0), 0.0);
        let budget = r.random_range(0.1..4.0);
        let quad = crate::local_solver::ReducedQuadratic {
            users: vec![0],
            theta: vec![theta.clone()],
            xi: vec![xi.clone()],
            budget,
        };
        let fast = solve_ball_constrained(&quad)?;
        let (x, _) = dense_ball(&theta, &xi, budget)?;
        let f_fast = quad.objective(&fast.w);
        let f_dense = quad.objective(std::slice::from_ref(&x));
        worst = worst.max((f_fast - f_dense) / f_dense.abs().max(1.0));
    }
    verdict(
        worst < 1e-8,
        format!("largest relative excess over the dense solve {worst:.1e}"),
    )
}

fn centralized_monotone(opts: &ValidateOptions) -> Result<std::result::Result<String, String>> {
    let copts = CentralizedOptions {
        tol: 0.0,
        max_iter: 15,
        ..Default::default()
    };
    for k in 0..10 {
        let (csi, mask, mut r) = instance(opts, 400 + k, 3, 4, 3)?;
        let budgets: Vec<f64> = (0..3).map(|_| r.random_range(0.5..20.0)).collect();
        let (w, rep) = run_centralized(&csi, &mask, &budgets, &copts)?;
        for pair in rep.objective_trace.windows(2) {
            if pair[1] > pair[0] + 1e-9 * pair[0].abs().max(1.0) {
                return verdict(
                    false,
                    format!("instance {k}: objective rose {} -> {}", pair[0], pair[1]),
                );
            }
        }
        if rep.max_power_ratio > 1.0 + 1e-9 || !w.is_feasible(1e-9) {
            return verdict(false, format!("instance {k}: power ratio {}", rep.max_power_ratio));
        }
    }
    verdict(true, "10 instances".into())
}

fn overhead_counts(opts: &ValidateOptions) -> Result<std::result::Result<String, String>> {
    let (ns, nu, u_max) = (5, 32, 8);
    let mut r = rng(opts, 500);
    let csi = random_csi(ns, 2, nu, &mut r)?;
    let mask = random_mask(ns, nu, u_max, &mut r)?;
    let budgets = vec![1.0; ns];
    let expected = [
        (TopologyKind::Ring, vec![2560; 5]),
        (TopologyKind::Mesh, vec![5120; 5]),
        (TopologyKind::Star, vec![5120, 1280, 1280, 1280, 1280]),
    ];
    let mut detail = Vec::new();
    for (kind, want) in expected {
        let topo = build_topology(&kind, ns)?;
        let opts = DecentralizedOptions {
            max_outer: 1,
            ..Default::default()
        };
        let (_, _, ledger) = run_decentralized(&csi, &mask, &budgets, &topo, &opts)?;
        let counts = ledger.per_iteration;
        if counts != want {
            return verdict(false, format!("{}: counted {counts:?}, expected {want:?}", kind.name()));
        }
        detail.push(format!("{} {counts:?}", kind.name()));
    }
    verdict(true, detail.join("; "))
}

fn small_config(seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.geometry.serving_count = 3;
    cfg.geometry.ut_count = 6;
    cfg.channel.arrays.n_h = 2;
    cfg.channel.arrays.n_v = 2;
    cfg.scheduler.u_max = 3;
    cfg.seed = seed;
    cfg
}

fn deterministic_drop(opts: &ValidateOptions) -> Result<std::result::Result<String, String>> {
    let mut cfg = small_config(opts.seed);
    cfg.solvers = vec![SolverKind::Decentralized, SolverKind::Centralized];
    cfg.tolerances.decentralized.max_outer = 30;
    let a = run_drop(&cfg, 0, 0)?;
    let b = run_drop(&cfg, 0, 0)?;
    for (x, y) in a.iter().zip(&b) {
        let (x, y) = (
            x.as_ref().map_err(|e| e.to_string()),
            y.as_ref().map_err(|e| e.to_string()),
        );
        match (x, y) {
            (Ok(x), Ok(y)) if x.trace == y.trace => {}
            (Ok(x), _) => return verdict(false, format!("{} traces differ between reruns", x.solver.name())),
            (Err(e), _) => return verdict(false, e),
        }
    }
    verdict(true, "two reruns produced identical traces".into())
}

fn hardening_bound(opts: &ValidateOptions) -> Result<std::result::Result<String, String>> {
    let mut worst = f64::NEG_INFINITY;
    for k in 0..10 {
        let (csi, mask, mut r) = instance(opts, 600 + k, 3, 4, 3)?;
        let mut w = BeamformerSet::zeros(3, 4, 3, vec![4.0; 3]);
        for s in 0..3 {
            for &u in &mask.served[s] {
                w.w[s][u] = random_vector(3, &mut r);
            }
        }
        let g = compute_beam_gains(&csi, &mask, &w)?;
        let bound = rate_lower_bound(&g, &csi);
        let mc = monte_carlo_rate(&csi, &mask, &w, 100_000, &mut r)?;
        for (b, m) in bound.iter().zip(&mc) {
            let z = (b - m.mean) / m.stderr.max(1e-300);
            worst = worst.max(z);
        }
    }
    verdict(worst <= 3.0, format!("largest (bound - MC) / stderr {worst:.2}"))
}

fn reduced_gradient(opts: &ValidateOptions) -> Result<std::result::Result<String, String>> {
    let mut worst: f64 = 0.0;
    let mut offset_spread: f64 = 0.0;
    for k in 0..5 {
        let (csi, mask, mut r) = instance(opts, 700 + k, 3, 3, 2)?;
        let sat = r.random_range(0..3);
        let st = random_state(&csi, &mask, sat, 1.0, &mut r)?;
        let ops = build_operators(&st, &csi, &mask)?;
        let quad = assemble_reduced(&ops, &st, &csi, &mask, 1.0);
        let full = |w: &[CVec]| -> f64 {
            let mut all = vec![CVec::zeros(csi.n_antennas()); csi.n_users()];
            for (&l, v) in quad.users.iter().zip(w) {
                all[l] = v.clone();
            }
            local_lagrangian(&st, &csi, &ops.apply(&csi, &all))
        };
        let w0: Vec<CVec> = quad
            .users
            .iter()
            .map(|_| random_vector(csi.n_antennas(), &mut r))
            .collect();
        let offsets: Vec<f64> = (0..5)
            .map(|_| {
                let w: Vec<CVec> = quad
                    .users
                    .iter()
                    .map(|_| random_vector(csi.n_antennas(), &mut r))
                    .collect();
                full(&w) - quad.objective(&w)
            })
            .collect();
        let lo = offsets.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = offsets.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        offset_spread = offset_spread.max((hi - lo) / lo.abs().max(1.0));

        let h = 1e-6;
        for (b, (t, x)) in quad.theta.iter().zip(&quad.xi).enumerate() {
            let analytic = (t * &w0[b] - x) * C64::new(2.0, 0.0);
            for e in 0..w0[b].len() {
                for dir in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                    let mut plus = w0.clone();
                    let mut minus = w0.clone();
                    plus[b][e] += dir * h;
                    minus[b][e] -= dir * h;
                    let fd = (full(&plus) - full(&minus)) / (2.0 * h);
                    let an = (analytic[e].conj() * dir).re;
                    worst = worst.max((fd - an).abs() / an.abs().max(1.0));
                }
            }
        }
    }
    verdict(
        worst < 1e-6 && offset_spread < 1e-10,
        format!("gradient error {worst:.1e}, offset spread {offset_spread:.1e}"),
    )
}

fn solve_matches_oracle(opts: &ValidateOptions) -> Result<std::result::Result<String, String>> {
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let (csi, mask, mut r) = instance(opts, 800 + k, 3, 3, 3)?;
        let sat = r.random_range(0..3);
        let st = random_state(&csi, &mask, sat, 1.0, &mut r)?;
        let budget = r.random_range(0.5..5.0);
        let fast = solve_local(&st, &csi, &mask, budget)?;
        let oracle = generic_local_oracle(&st, &csi, &mask, budget, 1e-14, 5000)?;
        let f_fast = local_lagrangian(&st, &csi, &fast.g);
        let f_oracle = *oracle.objective_trace.last().expect("non-empty trace");
        worst = worst.max((f_fast - f_oracle) / f_oracle.abs().max(1.0));
    }
    verdict(
        worst < 1e-7,
        format!("largest relative excess over the oracle {worst:.1e}"),
    )
}

fn decentralized_matches_centralized(opts: &ValidateOptions) -> Result<std::result::Result<String, String>> {
    let mut worst: f64 = 0.0;
    for d in 0..5 {
        let cfg = small_config(opts.seed);
        let mut r = super::runner::drop_rng(cfg.seed, d, 0);
        let scene = build_scene(&cfg.geometry, &mut r)?;
        let aods = compute_aods(&scene)?;
        let csi = build_csi(&scene, &aods, &cfg.channel, &mut r)?;
        let mask = schedule_cs(&csi, 3)?;
        let budgets = vec![crate::channel::dbm_to_watts(50.0); 3];
        let (_, cen) = run_centralized(&csi, &mask, &budgets, &CentralizedOptions::default())?;
        let topo = build_topology(&TopologyKind::Mesh, 3)?;
        let (_, dec, _) = run_decentralized(&csi, &mask, &budgets, &topo, &DecentralizedOptions::default())?;
        let c = *cen.sum_rate_trace.last().expect("non-empty trace");
        let x = *dec.sum_rate_trace.last().expect("non-empty trace");
        worst = worst.max((c - x).abs() / c);
    }
    verdict(worst < 0.02, format!("largest relative gap {worst:.2e}"))
}
