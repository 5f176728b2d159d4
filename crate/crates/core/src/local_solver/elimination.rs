//! Closed-form elimination of the consensus copies and assembly of the
//! reduced beamformer quadratic.
//!
//! For satellite `s` and a pair `(u, l)`, the copy `x = g_{-s,u,l}` only
//! couples to the beamformers through `y = b_{s,u}ᵀ delta_{s,l} w_{s,l}`.
//! Entries `i` with `l` not in `U_i` are structurally zero and are kept out of
//! the solve, so `Q` acts as `(rho |J_s| / 2) I` on them.

use nalgebra::{DMatrix, DVector};

use super::ball::ReducedQuadratic;
use crate::channel::StatisticalCsi;
use crate::decentralized::ConsensusState;
use crate::linalg::dot_t;
use crate::rates::GainTable;
use crate::scheduling::SchedulingMask;
use crate::{CMat, CVec, Error, Result, C64};

/// Operators of one `(u, l)` pair, in the coordinates `i != s`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairOperators {
    /// `Q = c_u M T_u[-s,-s] M + (rho |J_s| / 2) I`.
    pub q: DMatrix<f64>,
    /// `M T_u[-s, s]`.
    pub t: DVector<f64>,
    /// Left factor `p` of the rank-one `Γ_{u,l} = p b_{s,u}ᵀ`.
    pub gamma: CVec,
    pub zeta: CVec,
    /// Masked aggregate `M ḡ_{-s,u,l}`.
    pub g_bar: CVec,
    /// Linear term of the copy subproblem without the `y` contribution.
    pub f_base: CVec,
    /// Left factor `ω` of `Ω_{u,l} = ω b_{s,u}ᵀ`, length S.
    pub omega: CVec,
    pub eta: CVec,
}

impl PairOperators {
    /// `Γ_{u,l}` as an (S-1) x N matrix.
    pub fn gamma_matrix(&self, b: &CVec) -> CMat {
        &self.gamma * b.transpose()
    }

    /// `Ω_{u,l}` as an S x N matrix.
    pub fn omega_matrix(&self, b: &CVec) -> CMat {
        &self.omega * b.transpose()
    }
}

/// Closed-form copy-elimination operators of satellite `s` for every pair.
#[derive(Debug, Clone, PartialEq)]
pub struct EliminationOperators {
    pub sat: usize,
    pub n_sats: usize,
    pub n_users: usize,
    /// Satellite indices of the `-s` coordinates.
    pub others: Vec<usize>,
    /// `c_u = nu_u |mu_u|^2`.
    pub weight: Vec<f64>,
    /// `rho |J_s| / 2`.
    pub penalty: f64,
    pub n_consensus: usize,
    /// `delta_{s,l}` per user.
    pub scheduled: Vec<bool>,
    /// Indexed `u * U + l`.
    pub pairs: Vec<PairOperators>,
}

impl EliminationOperators {
    pub fn pair(&self, u: usize, l: usize) -> &PairOperators {
        &self.pairs[u * self.n_users + l]
    }

    /// Optimal local copies for fixed own beamformers `w` (indexed by user).
    pub fn apply(&self, csi: &StatisticalCsi, w: &[CVec]) -> GainTable {
        let s = self.sat;
        let mut g = GainTable::zeros(self.n_sats, self.n_users);
        for u in 0..self.n_users {
            for l in 0..self.n_users {
                let op = self.pair(u, l);
                let y = if self.scheduled[l] {
                    dot_t(&csi.b[s][u], &w[l])
                } else {
                    C64::new(0.0, 0.0)
                };
                let out = g.vec_mut(u, l);
                out[s] = y;
                for (k, &i) in self.others.iter().enumerate() {
                    out[i] = op.gamma[k] * y + op.zeta[k];
                }
            }
        }
        g
    }

    /// Largest `||Q x - f|| / max(||f||, tiny)` over all pairs, where `x` and
    /// the own entry are read from `g`.
    pub fn stationarity_residual(&self, g: &GainTable) -> f64 {
        let mut worst: f64 = 0.0;
        for u in 0..self.n_users {
            for l in 0..self.n_users {
                let op = self.pair(u, l);
                let v = g.vec(u, l);
                let y = v[self.sat];
                let x = CVec::from_iterator(self.others.len(), self.others.iter().map(|&i| v[i]));
                let f = &op.f_base - op.t.map(|t| C64::new(t * self.weight[u], 0.0)) * y;
                let qc = op.q.map(|q| C64::new(q, 0.0));
                let r = (&qc * &x - &f).norm();
                let scale = f.norm().max((&qc * &x).norm()).max(1e-300);
                worst = worst.max(r / scale);
            }
        }
        worst
    }
}

/// Builds the elimination operators from the satellite's current state.
pub fn build_operators(
    state: &ConsensusState,
    csi: &StatisticalCsi,
    mask: &SchedulingMask,
) -> Result<EliminationOperators> {
    let s = state.sat;
    let (ns, nu) = (csi.n_sats(), csi.n_users());
    if state.g_local.n_sats() != ns || state.g_local.n_users() != nu {
        return Err(Error::Shape("consensus state does not match the CSI".into()));
    }
    if !(state.rho > 0.0) {
        return Err(Error::Numeric(format!(
            "copy-update matrix Q is not positive definite: rho = {}",
            state.rho
        )));
    }
    let others: Vec<usize> = (0..ns).filter(|&i| i != s).collect();
    let m = others.len();
    let n_consensus = state.n_consensus();
    let penalty = 0.5 * state.rho * n_consensus as f64;
    let half_rho = 0.5 * state.rho;
    let g_bar = state.g_bar();
    let weight: Vec<f64> = (0..nu).map(|u| state.aux.nu[u] * state.aux.mu[u].norm_sqr()).collect();

    let mut pairs = Vec::with_capacity(nu * nu);
    for u in 0..nu {
        let c = weight[u];
        let tu = csi.gain_correlation(u);
        let nu_mu = state.aux.mu[u].conj() * state.aux.nu[u];
        for l in 0..nu {
            let active: Vec<bool> = others.iter().map(|&i| mask.delta[i][l]).collect();
            let own = mask.delta[s][l];
            let mut q = DMatrix::<f64>::zeros(m, m);
            let mut t = DVector::<f64>::zeros(m);
            let mut f_base = CVec::zeros(m);
            let mut gb = CVec::zeros(m);
            for (a, &i) in others.iter().enumerate() {
                q[(a, a)] = penalty;
                if !active[a] {
                    continue;
                }
                for (b, &j) in others.iter().enumerate() {
                    if active[b] {
                        q[(a, b)] += c * tu[(i, j)];
                    }
                }
                t[a] = tu[(i, s)];
                gb[a] = g_bar.get(i, u, l);
                f_base[a] = gb[a] * half_rho;
                if l == u {
                    f_base[a] += nu_mu * csi.alpha_bar[(i, u)];
                }
            }
            let chol = q.clone().cholesky().ok_or_else(|| {
                Error::Numeric(format!(
                    "copy-update matrix of pair ({u}, {l}) is not positive definite"
                ))
            })?;
            let gamma = if own {
                chol.solve(&t).map(|v| C64::new(-c * v, 0.0))
            } else {
                CVec::zeros(m)
            };
            let zeta = solve_real_chol(&chol, &f_base);
            let mut omega = CVec::zeros(ns);
            let mut eta = CVec::zeros(ns);
            if own {
                omega[s] = C64::new(1.0, 0.0);
            }
            for (a, &i) in others.iter().enumerate() {
                omega[i] = gamma[a];
                eta[i] = zeta[a];
            }
            pairs.push(PairOperators {
                q,
                t,
                gamma,
                zeta,
                g_bar: gb,
                f_base,
                omega,
                eta,
            });
        }
    }
    Ok(EliminationOperators {
        sat: s,
        n_sats: ns,
        n_users: nu,
        others,
        weight,
        penalty,
        n_consensus,
        scheduled: mask.delta[s].clone(),
        pairs,
    })
}

fn solve_real_chol(chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>, f: &CVec) -> CVec {
    let re = chol.solve(&f.map(|z| z.re));
    let im = chol.solve(&f.map(|z| z.im));
    CVec::from_fn(f.len(), |k, _| C64::new(re[k], im[k]))
}

/// Optimal copies `g^{(s)}` for fixed own beamformers.
pub fn eliminate_g(
    state: &ConsensusState,
    csi: &StatisticalCsi,
    mask: &SchedulingMask,
    w: &[CVec],
) -> Result<GainTable> {
    Ok(build_operators(state, csi, mask)?.apply(csi, w))
}

/// Reduced quadratic in the own beamformers after eliminating the copies.
pub fn assemble_reduced(
    ops: &EliminationOperators,
    state: &ConsensusState,
    csi: &StatisticalCsi,
    mask: &SchedulingMask,
    budget: f64,
) -> ReducedQuadratic {
    let s = ops.sat;
    let nu = ops.n_users;
    let n = csi.n_antennas();
    let bconj = CMat::from_fn(n, nu, |r, u| csi.b[s][u][r].conj());
    let bt = CMat::from_fn(nu, n, |u, r| csi.b[s][u][r]);
    let tus: Vec<DMatrix<f64>> = (0..nu).map(|u| csi.gain_correlation(u)).collect();
    let n_c = ops.n_consensus as f64;

    let users = mask.served[s].clone();
    let mut theta = Vec::with_capacity(users.len());
    let mut xi = Vec::with_capacity(users.len());
    for &l in &users {
        let mut a = vec![0.0; nu];
        let mut psi = CVec::zeros(nu);
        for u in 0..nu {
            let op = ops.pair(u, l);
            let c = ops.weight[u];
            let t_omega = real_times(&tus[u], &op.omega);
            let t_eta = real_times(&tus[u], &op.eta);
            a[u] = ops.penalty * op.gamma.norm_squared() + c * op.omega.dotc(&t_omega).re;
            let avg = &op.g_bar / C64::new(n_c, 0.0) - &op.zeta;
            let mut v = op.gamma.dotc(&avg) * ops.penalty - op.omega.dotc(&t_eta) * c;
            if l == u {
                let proj: C64 = op
                    .omega
                    .iter()
                    .enumerate()
                    .map(|(i, w)| w.conj() * csi.alpha_bar[(i, u)])
                    .sum();
                v += state.aux.mu[u].conj() * state.aux.nu[u] * proj;
            }
            psi[u] = v;
        }
        let mut scaled = bconj.clone();
        for (u, &au) in a.iter().enumerate() {
            scaled.column_mut(u).scale_mut(au);
        }
        let mut th = scaled * &bt;
        // Restore exact Hermitian symmetry lost to rounding.
        th = (&th + th.adjoint()) * C64::new(0.5, 0.0);
        theta.push(th);
        xi.push(&bconj * psi);
    }
    ReducedQuadratic {
        users,
        theta,
        xi,
        budget,
    }
}

fn real_times(t: &DMatrix<f64>, v: &CVec) -> CVec {
    CVec::from_fn(v.len(), |i, _| (0..v.len()).map(|j| v[j] * t[(i, j)]).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::synthetic::{random_csi, random_mask, random_state};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eliminated_copies_are_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let csi = random_csi(4, 3, 3, &mut rng).unwrap();
        let mask = random_mask(4, 3, 2, &mut rng).unwrap();
        let st = random_state(&csi, &mask, 2, 0.7, &mut rng).unwrap();
        let ops = build_operators(&st, &csi, &mask).unwrap();
        let g = ops.apply(&csi, &st.w);
        assert!(ops.stationarity_residual(&g) < 1e-12);
        for u in 0..3 {
            for l in 0..3 {
                let expect = if mask.delta[2][l] {
                    dot_t(&csi.b[2][u], &st.w[l])
                } else {
                    C64::new(0.0, 0.0)
                };
                assert!((g.get(2, u, l) - expect).norm() < 1e-14);
                for i in 0..4 {
                    if !mask.delta[i][l] {
                        assert_eq!(g.get(i, u, l), C64::new(0.0, 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn zero_penalty_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let csi = random_csi(3, 2, 2, &mut rng).unwrap();
        let mask = random_mask(3, 2, 1, &mut rng).unwrap();
        let mut st = random_state(&csi, &mask, 0, 1.0, &mut rng).unwrap();
        st.rho = 0.0;
        let err = build_operators(&st, &csi, &mask).unwrap_err();
        assert!(err.to_string().contains("not positive definite"));
    }
}
