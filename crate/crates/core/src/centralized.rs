//! Centralized WMMSE: closed-form receive scalars and weights alternated with
//! an exact beamformer update. The beamformer subproblem is jointly convex
//! with a per-satellite ball constraint, and is solved by cyclic
//! block-coordinate descent over satellites, each block being the same
//! eigendecomposition plus line search as the local solver.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::mrt;
use crate::beamformer::BeamformerSet;
use crate::channel::StatisticalCsi;
use crate::linalg::{dot_t, hermitian_eigen};
use crate::local_solver::ball::{solve_spectral, SpectralBlock, SpectralQuadratic};
use crate::local_solver::oracle::project_ball;
use crate::rates::{compute_beam_gains, sum_rate, upsilon, wmmse_value, GainTable, WmmseAux};
use crate::scheduling::SchedulingMask;
use crate::{CMat, CVec, Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CentralizedOptions {
    /// Outer stop: objective reduction relative to the achieved utility.
    pub tol: f64,
    pub max_iter: usize,
    /// Block-coordinate stop: relative reduction of the beamformer objective per sweep.
    pub bcd_tol: f64,
    pub max_sweeps: usize,
}

impl Default for CentralizedOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_iter: 50,
            bcd_tol: 1e-10,
            max_sweeps: 200,
        }
    }
}

/// Per-solve traces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// WMMSE objective at the optimal auxiliaries, one entry per iterate
    /// starting from the initial point.
    pub objective_trace: Vec<f64>,
    pub sum_rate_trace: Vec<f64>,
    pub converged: bool,
    pub wall_time_s: f64,
    /// Largest `power / budget` observed after any block update.
    pub max_power_ratio: f64,
    /// Consensus residual per iterate; empty for centralized solves.
    pub primal_residual_trace: Vec<f64>,
}

/// `sum_u nu_u Upsilon_u`: the beamformer objective for fixed auxiliaries.
pub fn beamformer_objective(aux: &WmmseAux, g: &GainTable, csi: &StatisticalCsi) -> f64 {
    (0..csi.n_users())
        .map(|u| aux.nu[u] * upsilon(aux.mu[u], g, csi, u))
        .sum()
}

/// Quadratic of satellite `s` with all other satellites' beamformers fixed
/// through `g`. Its curvature does not depend on the served user, so one
/// eigendecomposition serves every block.
pub fn block_quadratic(
    aux: &WmmseAux,
    csi: &StatisticalCsi,
    mask: &SchedulingMask,
    g: &GainTable,
    s: usize,
    budget: f64,
) -> Result<SpectralQuadratic> {
    let (ns, nu, n) = (csi.n_sats(), csi.n_users(), csi.n_antennas());
    let weight: Vec<f64> = (0..nu).map(|u| aux.nu[u] * aux.mu[u].norm_sqr()).collect();
    let tus: Vec<_> = (0..nu).map(|u| csi.gain_correlation(u)).collect();
    let bconj = CMat::from_fn(n, nu, |r, u| csi.b[s][u][r].conj());
    let mut scaled = bconj.clone();
    for u in 0..nu {
        scaled.column_mut(u).scale_mut(weight[u] * tus[u][(s, s)]);
    }
    let bt = CMat::from_fn(nu, n, |u, r| csi.b[s][u][r]);
    let theta = scaled * bt;
    let (vals, vecs) = hermitian_eigen(&theta)?;
    let blocks = mask.served[s]
        .iter()
        .map(|&l| {
            let psi = CVec::from_fn(nu, |u, _| {
                let cross: C64 = (0..ns)
                    .filter(|&i| i != s)
                    .map(|i| g.get(i, u, l) * tus[u][(s, i)])
                    .sum();
                let mut v = -cross * weight[u];
                if l == u {
                    v += aux.mu[u].conj() * aux.nu[u] * csi.alpha_bar[(s, u)];
                }
                v
            });
            let xi = &bconj * psi;
            SpectralBlock {
                vals: vals.clone(),
                vecs: vecs.clone(),
                varpi: vecs.adjoint() * xi,
            }
        })
        .collect();
    Ok(SpectralQuadratic { blocks, budget })
}

fn refresh_gains(g: &mut GainTable, csi: &StatisticalCsi, mask: &SchedulingMask, w: &BeamformerSet, s: usize) {
    for &l in &mask.served[s] {
        for u in 0..csi.n_users() {
            g.set(s, u, l, dot_t(&csi.b[s][u], &w.w[s][l]));
        }
    }
}

/// Beamformer update for fixed auxiliaries by cyclic exact block updates.
/// Returns the new beamformers, whether the sweeps converged, and the
/// largest power ratio seen after any block update.
pub fn solve_beamformers_centralized(
    aux: &WmmseAux,
    csi: &StatisticalCsi,
    mask: &SchedulingMask,
    w_init: &BeamformerSet,
    tol: f64,
    max_sweeps: usize,
) -> Result<(BeamformerSet, bool, f64)> {
    if aux.nu.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Numeric("MSE weights must be positive".into()));
    }
    let mut w = w_init.clone();
    w.apply_mask(mask);
    let mut g = compute_beam_gains(csi, mask, &w)?;
    let mut obj = beamformer_objective(aux, &g, csi);
    let mut max_ratio: f64 = 0.0;
    for _ in 0..max_sweeps {
        for s in 0..csi.n_sats() {
            let sq = block_quadratic(aux, csi, mask, &g, s, w.power_budget[s])?;
            let sol = solve_spectral(&sq)?;
            for (&l, v) in mask.served[s].iter().zip(sol.w) {
                w.w[s][l] = v;
            }
            refresh_gains(&mut g, csi, mask, &w, s);
            if w.power_budget[s] > 0.0 {
                max_ratio = max_ratio.max(w.power(s) / w.power_budget[s]);
            }
        }
        let next = beamformer_objective(aux, &g, csi);
        let gain = obj - next;
        obj = next;
        if gain <= tol * obj.abs().max(1e-300) {
            return Ok((w, true, max_ratio));
        }
    }
    Ok((w, false, max_ratio))
}

/// Centralized WMMSE from MRT initialization.
pub fn run_centralized(
    csi: &StatisticalCsi,
    mask: &SchedulingMask,
    budgets: &[f64],
    opts: &CentralizedOptions,
) -> Result<(BeamformerSet, SolveReport)> {
    run_centralized_from(csi, mask, mrt(csi, mask, budgets)?, opts)
}

pub fn run_centralized_from(
    csi: &StatisticalCsi,
    mask: &SchedulingMask,
    w0: BeamformerSet,
    opts: &CentralizedOptions,
) -> Result<(BeamformerSet, SolveReport)> {
    let start = Instant::now();
    let n_users = csi.n_users() as f64;
    let mut w = w0;
    let mut g = compute_beam_gains(csi, mask, &w)?;
    let mut objective_trace = vec![wmmse_value(&g, csi)];
    let mut sum_rate_trace = vec![sum_rate(&g, csi)];
    let mut converged = false;
    let mut iterations = 0;
    let mut max_power_ratio: f64 = 0.0;
    for _ in 0..opts.max_iter {
        let aux = WmmseAux::optimal(&g, csi)?;
        let (w_new, _, ratio) = solve_beamformers_centralized(&aux, csi, mask, &w, opts.bcd_tol, opts.max_sweeps)?;
        max_power_ratio = max_power_ratio.max(ratio);
        w = w_new;
        g = compute_beam_gains(csi, mask, &w)?;
        iterations += 1;
        let obj = wmmse_value(&g, csi);
        let prev = *objective_trace.last().expect("non-empty trace");
        objective_trace.push(obj);
        sum_rate_trace.push(sum_rate(&g, csi));
        if prev - obj <= opts.tol * (n_users - obj).abs().max(1e-300) {
            converged = true;
            break;
        }
    }
    let report = SolveReport {
        iterations,
        objective_trace,
        sum_rate_trace,
        converged,
        wall_time_s: start.elapsed().as_secs_f64(),
        max_power_ratio,
        primal_residual_trace: Vec::new(),
    };
    Ok((w, report))
}

/// Projected-gradient reference for the beamformer subproblem: fixed step
/// `1 / L` with `L` estimated by power iteration on the Hessian.
pub fn projected_gradient_centralized(
    aux: &WmmseAux,
    csi: &StatisticalCsi,
    mask: &SchedulingMask,
    budgets: &[f64],
    steps: usize,
) -> Result<BeamformerSet> {
    let (ns, nu, n) = (csi.n_sats(), csi.n_users(), csi.n_antennas());
    let zero = BeamformerSet::zeros(ns, nu, n, budgets.to_vec());
    let g0 = compute_beam_gains(csi, mask, &zero)?;
    let grad0 = gradient(aux, csi, mask, &g0);

    // Hessian action: gradient(w) - gradient(0).
    let mut v = zero.clone();
    for s in 0..ns {
        for &l in &mask.served[s] {
            v.w[s][l] = CVec::from_element(n, C64::new(1.0, 0.0));
        }
    }
    let mut lmax = 0.0;
    for _ in 0..200 {
        let nrm = stacked_norm(&v);
        if nrm == 0.0 {
            break;
        }
        scale(&mut v, 1.0 / nrm);
        let gv = compute_beam_gains(csi, mask, &v)?;
        let hv = gradient(aux, csi, mask, &gv);
        let mut next = v.clone();
        for s in 0..ns {
            for &l in &mask.served[s] {
                next.w[s][l] = &hv[s][l] - &grad0[s][l];
            }
        }
        lmax = stacked_norm(&next);
        v = next;
    }
    let step = if lmax > 0.0 { 1.0 / (1.01 * lmax) } else { 1.0 };

    let mut w = zero;
    for _ in 0..steps {
        let g = compute_beam_gains(csi, mask, &w)?;
        let grad = gradient(aux, csi, mask, &g);
        for s in 0..ns {
            for &l in &mask.served[s] {
                let d = &grad[s][l] * C64::new(step, 0.0);
                w.w[s][l] -= d;
            }
            project_ball(&mut w.w[s], budgets[s]);
        }
    }
    Ok(w)
}

fn gradient(aux: &WmmseAux, csi: &StatisticalCsi, mask: &SchedulingMask, g: &GainTable) -> Vec<Vec<CVec>> {
    let (ns, nu, n) = (csi.n_sats(), csi.n_users(), csi.n_antennas());
    let mut out = vec![vec![CVec::zeros(n); nu]; ns];
    for u in 0..nu {
        let t = csi.gain_correlation(u);
        let c = aux.nu[u] * aux.mu[u].norm_sqr();
        for s in 0..ns {
            for &l in &mask.served[s] {
                let tg: C64 = (0..ns).map(|i| g.get(i, u, l) * t[(s, i)]).sum();
                let mut coef = tg * c;
                if l == u {
                    coef -= aux.mu[u].conj() * aux.nu[u] * csi.alpha_bar[(s, u)];
                }
                out[s][l] += csi.b[s][u].map(|x| x.conj()) * coef;
            }
        }
    }
    out
}

fn stacked_norm(w: &BeamformerSet) -> f64 {
    w.w.iter().flatten().map(|v| v.norm_squared()).sum::<f64>().sqrt()
}

fn scale(w: &mut BeamformerSet, k: f64) {
    for v in w.w.iter_mut().flatten() {
        *v *= C64::new(k, 0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::synthetic::{random_csi, random_mask};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn instance(seed: u64, ns: usize, n: usize, nu: usize) -> (StatisticalCsi, SchedulingMask) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let csi = random_csi(ns, n, nu, &mut rng).unwrap();
        let mask = random_mask(ns, nu, nu, &mut rng).unwrap();
        (csi, mask)
    }

    fn subproblem_gap(seed: u64, ns: usize) -> f64 {
        let (csi, mask) = instance(seed, ns, 2, 2);
        let budgets = vec![2.0; ns];
        let w0 = mrt(&csi, &mask, &budgets).unwrap();
        let aux = WmmseAux::optimal(&compute_beam_gains(&csi, &mask, &w0).unwrap(), &csi).unwrap();
        let (w, converged, _) = solve_beamformers_centralized(&aux, &csi, &mask, &w0, 1e-14, 5000).unwrap();
        assert!(converged);
        let pg = projected_gradient_centralized(&aux, &csi, &mask, &budgets, 100_000).unwrap();
        let f = |w: &BeamformerSet| beamformer_objective(&aux, &compute_beam_gains(&csi, &mask, w).unwrap(), &csi);
        f(&w) - f(&pg)
    }

    #[test]
    fn single_satellite_matches_projected_gradient() {
        assert!(subproblem_gap(1, 1) < 1e-8);
    }

    #[test]
    fn two_satellites_match_projected_gradient() {
        assert!(subproblem_gap(2, 2) < 1e-6);
    }

    #[test]
    fn zero_linear_term_gives_zero_beams() {
        let (csi, mask) = instance(3, 2, 3, 2);
        let aux = WmmseAux {
            mu: vec![C64::new(0.0, 0.0); 2],
            nu: vec![1.0; 2],
        };
        let w0 = mrt(&csi, &mask, &[1.0, 1.0]).unwrap();
        let (w, _, _) = solve_beamformers_centralized(&aux, &csi, &mask, &w0, 1e-12, 50).unwrap();
        assert!(w.w.iter().flatten().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn trace_starts_at_mrt_and_is_monotone() {
        let (csi, mask) = instance(4, 3, 2, 4);
        let budgets = vec![5.0; 3];
        let (w, rep) = run_centralized(&csi, &mask, &budgets, &CentralizedOptions::default()).unwrap();
        let g_mrt = compute_beam_gains(&csi, &mask, &mrt(&csi, &mask, &budgets).unwrap()).unwrap();
        assert_eq!(rep.sum_rate_trace[0], sum_rate(&g_mrt, &csi));
        assert_eq!(rep.objective_trace.len(), rep.iterations + 1);
        assert!(rep.objective_trace.windows(2).all(|p| p[1] <= p[0] + 1e-9));
        assert!(w.is_feasible(1e-9));
        assert!(rep.sum_rate_trace.last().unwrap() > &rep.sum_rate_trace[0]);
    }

    #[test]
    fn converged_point_is_a_fixed_point_of_the_aux_updates() {
        let (csi, mask) = instance(5, 2, 2, 3);
        let opts = CentralizedOptions {
            tol: 1e-13,
            max_iter: 2000,
            ..Default::default()
        };
        let (w, rep) = run_centralized(&csi, &mask, &[3.0, 3.0], &opts).unwrap();
        assert!(rep.converged);
        let g = compute_beam_gains(&csi, &mask, &w).unwrap();
        let a = WmmseAux::optimal(&g, &csi).unwrap();
        let (w2, _, _) = solve_beamformers_centralized(&a, &csi, &mask, &w, 1e-14, 500).unwrap();
        let b = WmmseAux::optimal(&compute_beam_gains(&csi, &mask, &w2).unwrap(), &csi).unwrap();
        for u in 0..3 {
            assert!((a.mu[u] - b.mu[u]).norm() < 1e-5 * a.mu[u].norm().max(1.0));
            assert!((a.nu[u] - b.nu[u]).abs() < 1e-5 * a.nu[u]);
        }
    }

    #[test]
    fn rejects_non_positive_weights() {
        let (csi, mask) = instance(6, 2, 2, 2);
        let aux = WmmseAux {
            mu: vec![C64::new(1.0, 0.0); 2],
            nu: vec![1.0, 0.0],
        };
        let w0 = BeamformerSet::zeros(2, 2, 2, vec![1.0; 2]);
        assert!(solve_beamformers_centralized(&aux, &csi, &mask, &w0, 1e-9, 10).is_err());
    }
}
