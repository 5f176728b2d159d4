//! Reference solvers for the local problem, built from dense linear algebra
//! without the rank-one and block-diagonal shortcuts. Used for testing and
//! for timing comparisons.

use std::time::Instant;

use super::local_lagrangian;
use crate::channel::StatisticalCsi;
use crate::decentralized::ConsensusState;
use crate::linalg::{dot_t, solve};
use crate::rates::GainTable;
use crate::scheduling::SchedulingMask;
use crate::{CMat, CVec, Error, Result, C64};

/// Dense solve of every copy subproblem for fixed own beamformers.
pub fn dense_g_solve(
    state: &ConsensusState,
    csi: &StatisticalCsi,
    mask: &SchedulingMask,
    w: &[CVec],
) -> Result<GainTable> {
    let s = state.sat;
    let (ns, nu) = (csi.n_sats(), csi.n_users());
    let rho = state.rho;
    let members = state.snapshots.len() as f64;
    let mut g = GainTable::zeros(ns, nu);
    for u in 0..nu {
        let t = csi.gain_correlation(u);
        let mu = state.aux.mu[u];
        let nuw = state.aux.nu[u];
        let c = nuw * mu.norm_sqr();
        for l in 0..nu {
            let y = if mask.delta[s][l] {
                dot_t(&csi.b[s][u], &w[l])
            } else {
                C64::new(0.0, 0.0)
            };
            g.set(s, u, l, y);
            let act: Vec<usize> = (0..ns).filter(|&i| i != s && mask.delta[i][l]).collect();
            if act.is_empty() {
                continue;
            }
            let k = act.len();
            let q = CMat::from_fn(k, k, |a, b| {
                let diag = if a == b { 0.5 * rho * members } else { 0.0 };
                C64::new(c * t[(act[a], act[b])] + diag, 0.0)
            });
            let f = CVec::from_fn(k, |a, _| {
                let i = act[a];
                let agg: C64 = state
                    .snapshots
                    .iter()
                    .zip(&state.duals)
                    .map(|(gs, z)| gs.get(i, u, l) - z.get(i, u, l) / rho)
                    .sum();
                let lin = if l == u {
                    (mu.conj() - mu.norm_sqr() * csi.alpha_bar[(s, u)] * y) * nuw * csi.alpha_bar[(i, u)]
                } else {
                    -y * c * t[(i, s)]
                };
                lin + agg * (0.5 * rho)
            });
            let x = solve(q, &f)?;
            for (a, &i) in act.iter().enumerate() {
                g.set(i, u, l, x[a]);
            }
        }
    }
    Ok(g)
}

/// Dense ball-constrained solve for the own beamformers with the copies
/// fixed; returns beamformers indexed by user and the multiplier.
pub fn dense_w_solve(
    state: &ConsensusState,
    csi: &StatisticalCsi,
    mask: &SchedulingMask,
    g: &GainTable,
    budget: f64,
) -> Result<(Vec<CVec>, f64)> {
    let s = state.sat;
    let (ns, nu, n) = (csi.n_sats(), csi.n_users(), csi.n_antennas());
    let users = &mask.served[s];
    let dim = n * users.len();
    let mut theta = CMat::zeros(dim, dim);
    let mut xi = CVec::zeros(dim);
    for (k, &l) in users.iter().enumerate() {
        for u in 0..nu {
            let t = csi.gain_correlation(u);
            let mu = state.aux.mu[u];
            let c = state.aux.nu[u] * mu.norm_sqr();
            let cross: C64 = (0..ns).filter(|&i| i != s).map(|i| g.get(i, u, l) * t[(s, i)]).sum();
            let mut psi = -cross * c;
            if l == u {
                psi += mu.conj() * state.aux.nu[u] * csi.alpha_bar[(s, u)];
            }
            let b = &csi.b[s][u];
            for r in 0..n {
                xi[k * n + r] += b[r].conj() * psi;
                for q in 0..n {
                    theta[(k * n + r, k * n + q)] += b[r].conj() * b[q] * (c * t[(s, s)]);
                }
            }
        }
    }
    let (x, lambda) = dense_ball(&theta, &xi, budget)?;
    let mut w = vec![CVec::zeros(n); nu];
    for (k, &l) in users.iter().enumerate() {
        w[l] = x.rows(k * n, n).into_owned();
    }
    Ok((w, lambda))
}

/// `min xᴴΘx - 2 Re ξᴴx` s.t. `||x||^2 <= P` by bisection on `λ` with a
/// fresh factorization of `Θ + λI` at every step.
pub fn dense_ball(theta: &CMat, xi: &CVec, budget: f64) -> Result<(CVec, f64)> {
    let dim = xi.len();
    if xi.norm_squared() == 0.0 || budget == 0.0 {
        return Ok((CVec::zeros(dim), 0.0));
    }
    let shifted = |lam: f64| -> Option<CVec> {
        let m = theta + CMat::identity(dim, dim) * C64::new(lam, 0.0);
        m.cholesky().map(|ch| ch.solve(xi))
    };
    if let Some(x) = shifted(0.0) {
        if x.iter().all(|v| v.is_finite()) && x.norm_squared() <= budget {
            return Ok((x, 0.0));
        }
    }
    let mut lo = 0.0;
    let mut hi = xi.norm() / budget.sqrt();
    let mut best = shifted(hi).ok_or_else(|| Error::Numeric("shifted system not positive definite".into()))?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match shifted(mid) {
            Some(x) if x.norm_squared() <= budget => {
                hi = mid;
                best = x;
            }
            _ => lo = mid,
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok((best, hi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub w: Vec<CVec>,
    pub g: GainTable,
    pub objective_trace: Vec<f64>,
    pub wall_time_s: f64,
}

/// Alternating exact minimization over the copies and the beamformers until
/// the relative objective improvement drops below `tol` or `max_iter` passes.
pub fn generic_local_oracle(
    state: &ConsensusState,
    csi: &StatisticalCsi,
    mask: &SchedulingMask,
    budget: f64,
    tol: f64,
    max_iter: usize,
) -> Result<OracleSolution> {
    let start = Instant::now();
    let mut w = state.w.clone();
    let mut g = dense_g_solve(state, csi, mask, &w)?;
    let mut trace = vec![local_lagrangian(state, csi, &g)];
    for _ in 0..max_iter {
        let (w_new, _) = dense_w_solve(state, csi, mask, &g, budget)?;
        w = w_new;
        g = dense_g_solve(state, csi, mask, &w)?;
        let obj = local_lagrangian(state, csi, &g);
        let prev = *trace.last().expect("non-empty trace");
        trace.push(obj);
        if (prev - obj).abs() <= tol * prev.abs().max(1.0) {
            break;
        }
    }
    Ok(OracleSolution {
        w,
        g,
        objective_trace: trace,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Projected gradient with step `1 / ω_max` on a ball-constrained quadratic,
/// started from zero. Returns block vectors.
pub fn projected_gradient_ball(quad: &super::ReducedQuadratic, steps: usize) -> Result<Vec<CVec>> {
    let lmax = quad.spectral()?.max_eigenvalue();
    let step = if lmax > 0.0 { 1.0 / lmax } else { 1.0 };
    let mut w: Vec<CVec> = quad.xi.iter().map(|x| CVec::zeros(x.len())).collect();
    for _ in 0..steps {
        for ((wb, t), x) in w.iter_mut().zip(&quad.theta).zip(&quad.xi) {
            let grad = t * &*wb - x;
            *wb -= grad * C64::new(step, 0.0);
        }
        project_ball(&mut w, quad.budget);
    }
    Ok(w)
}

/// Scales the stacked vector back onto `||w||^2 <= P` when outside.
pub fn project_ball(w: &mut [CVec], budget: f64) {
    let p: f64 = w.iter().map(|v| v.norm_squared()).sum();
    if p > budget {
        let k = C64::new((budget / p).sqrt(), 0.0);
        for v in w.iter_mut() {
            *v *= k;
        }
    }
}
