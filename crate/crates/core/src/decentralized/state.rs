//! Per-satellite consensus state.

use crate::rates::{GainTable, WmmseAux};
use crate::{CVec, Error, Result, C64};

/// Everything satellite `s` holds between consensus rounds.
///
/// `snapshots[k]` and `duals[k]` belong to the k-th member of
/// [`ConsensusState::consensus_set`], the neighbours plus `s` itself in
/// ascending order. Only entries `i != s` of the tables take part in the
/// consensus; the own entries of `g_local` are the exact gains of `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusState {
    pub sat: usize,
    pub neighbors: Vec<usize>,
    pub g_local: GainTable,
    pub snapshots: Vec<GainTable>,
    pub duals: Vec<GainTable>,
    /// Absolute ADMM penalty.
    pub rho: f64,
    pub aux: WmmseAux,
    /// Own beamformers indexed by user, zero for users not served here.
    pub w: Vec<CVec>,
}

impl ConsensusState {
    pub fn new(
        sat: usize,
        mut neighbors: Vec<usize>,
        g_local: GainTable,
        rho: f64,
        aux: WmmseAux,
        w: Vec<CVec>,
    ) -> Result<Self> {
        neighbors.sort_unstable();
        neighbors.dedup();
        if neighbors.contains(&sat) {
            return Err(Error::Topology(format!("satellite {sat} lists itself as a neighbour")));
        }
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::Numeric(format!("penalty rho = {rho} must be positive")));
        }
        if w.len() != g_local.n_users() || aux.mu.len() != g_local.n_users() {
            return Err(Error::Shape("beamformer/aux length differs from user count".into()));
        }
        let members = neighbors.len() + 1;
        let (ns, nu) = (g_local.n_sats(), g_local.n_users());
        Ok(Self {
            sat,
            neighbors,
            snapshots: vec![g_local.clone(); members],
            duals: vec![GainTable::zeros(ns, nu); members],
            g_local,
            rho,
            aux,
            w,
        })
    }

    /// `J_s = G_s ∪ {s}`, ascending.
    pub fn consensus_set(&self) -> Vec<usize> {
        let mut j = self.neighbors.clone();
        j.push(self.sat);
        j.sort_unstable();
        j
    }

    /// `|G_s| + 1`.
    pub fn n_consensus(&self) -> usize {
        self.neighbors.len() + 1
    }

    /// Position of satellite `j` within [`Self::consensus_set`].
    pub fn slot(&self, j: usize) -> Option<usize> {
        self.consensus_set().iter().position(|&x| x == j)
    }

    /// `sum_j (g~^{(j)} - z^{(j)} / rho)`, the aggregate that enters the
    /// consensus-copy update.
    pub fn g_bar(&self) -> GainTable {
        let mut out = GainTable::zeros(self.g_local.n_sats(), self.g_local.n_users());
        let inv = 1.0 / self.rho;
        for (snap, dual) in self.snapshots.iter().zip(&self.duals) {
            for ((o, g), z) in out.as_mut_slice().iter_mut().zip(snap.as_slice()).zip(dual.as_slice()) {
                *o += g - z * inv;
            }
        }
        out
    }

    /// Consensus part of the local augmented Lagrangian at copy `x`.
    pub fn consensus_penalty(&self, x: &GainTable) -> f64 {
        let s = self.sat;
        let ns = x.n_sats();
        let nu = x.n_users();
        let mut total = 0.0;
        for (snap, dual) in self.snapshots.iter().zip(&self.duals) {
            for u in 0..nu {
                for l in 0..nu {
                    let (xv, gv, zv) = (x.vec(u, l), snap.vec(u, l), dual.vec(u, l));
                    for i in (0..ns).filter(|&i| i != s) {
                        let d: C64 = xv[i] - gv[i];
                        total += (zv[i].conj() * d).re + 0.5 * self.rho * d.norm_sqr();
                    }
                }
            }
        }
        total
    }
}
