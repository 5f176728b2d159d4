//! Synchronous decentralized WMMSE with consensus ADMM.
//!
//! A round is a parallel map over satellites against the snapshots received
//! in the previous round, followed by a barrier at which every message is
//! committed at once. Results do not depend on the size of the worker pool.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::overhead::OverheadLedger;
use super::state::ConsensusState;
use super::topology::IslTopology;
use crate::baselines::mrt;
use crate::beamformer::BeamformerSet;
use crate::centralized::SolveReport;
use crate::channel::StatisticalCsi;
use crate::local_solver::solve_local;
use crate::rates::{compute_beam_gains, sum_rate, wmmse_value, GainTable, WmmseAux};
use crate::scheduling::SchedulingMask;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    /// One consensus round per auxiliary update.
    #[default]
    Flattened,
    /// Consensus rounds until the residual settles, then an auxiliary update.
    Nested,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecentralizedOptions {
    /// Dimensionless penalty, scaled by [`reference_penalty`].
    pub rho_g: f64,
    pub schedule: Schedule,
    pub max_outer: usize,
    /// Relative change of satellite 0's objective that ends the run.
    pub tol: f64,
    /// Relative residual that ends an inner loop (nested schedule).
    pub inner_tol: f64,
    pub max_inner: usize,
    /// Relative consensus residual required before the run may stop.
    pub residual_tol: f64,
}

impl Default for DecentralizedOptions {
    fn default() -> Self {
        Self {
            rho_g: 1000.0,
            schedule: Schedule::Flattened,
            max_outer: 500,
            tol: 1e-4,
            inner_tol: 1e-4,
            max_inner: 100,
            residual_tol: 1e-3,
        }
    }
}

/// Penalty scale shared by all satellites:
/// `(1/U) sum_u nu_u |mu_u|^2 tr(T_u)` at the given gains with optimal auxiliaries.
pub fn reference_penalty(csi: &StatisticalCsi, g: &GainTable) -> Result<f64> {
    let aux = WmmseAux::optimal(g, csi)?;
    let nu = csi.n_users();
    let total: f64 = (0..nu)
        .map(|u| aux.nu[u] * aux.mu[u].norm_sqr() * csi.gain_correlation(u).trace())
        .sum();
    let r = total / nu as f64;
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Numeric(format!("reference penalty {r}")));
    }
    Ok(r)
}

/// Receive scalars and weights from the satellite's own copies.
pub fn local_outer_update(state: &mut ConsensusState, csi: &StatisticalCsi) -> Result<()> {
    state.aux = WmmseAux::optimal(&state.g_local, csi)?;
    Ok(())
}

/// Entries `(i, u, l)` with `l` served by `i`, in a fixed order known to all.
fn message_pattern(mask: &SchedulingMask) -> Vec<(usize, usize, usize)> {
    let nu = mask.n_users();
    let mut out = Vec::new();
    for u in 0..nu {
        for l in 0..nu {
            for i in 0..mask.n_sats() {
                if mask.delta[i][l] {
                    out.push((i, u, l));
                }
            }
        }
    }
    out
}

fn pack(g: &GainTable, pattern: &[(usize, usize, usize)]) -> Vec<C64> {
    pattern.iter().map(|&(i, u, l)| g.get(i, u, l)).collect()
}

fn unpack(msg: &[C64], pattern: &[(usize, usize, usize)], n_sats: usize, n_users: usize) -> GainTable {
    let mut g = GainTable::zeros(n_sats, n_users);
    for (&(i, u, l), &v) in pattern.iter().zip(msg) {
        g.set(i, u, l, v);
    }
    g
}

/// Sends every satellite's copy to its neighbours and refreshes all
/// snapshots at once. Returns the scalars sent per satellite.
fn exchange(states: &mut [ConsensusState], topology: &IslTopology, mask: &SchedulingMask) -> Vec<u64> {
    let pattern = message_pattern(mask);
    let outbox: Vec<Vec<C64>> = states.iter().map(|st| pack(&st.g_local, &pattern)).collect();
    let counts = (0..states.len())
        .map(|s| (outbox[s].len() * topology.degree(s)) as u64)
        .collect();
    let (ns, nu) = (mask.n_sats(), mask.n_users());
    for st in states.iter_mut() {
        let set = st.consensus_set();
        for (k, &j) in set.iter().enumerate() {
            st.snapshots[k] = if j == st.sat {
                st.g_local.clone()
            } else {
                unpack(&outbox[j], &pattern, ns, nu)
            };
        }
    }
    counts
}

/// Largest `|g^{(s)}_i - g~^{(j)}_i|` over satellites, neighbours and `i != s`.
pub fn primal_residual(states: &[ConsensusState]) -> f64 {
    let mut worst: f64 = 0.0;
    for st in states {
        let s = st.sat;
        let ns = st.g_local.n_sats();
        for (k, j) in st.consensus_set().into_iter().enumerate() {
            if j == s {
                continue;
            }
            for (idx, (a, b)) in st.g_local.as_slice().iter().zip(st.snapshots[k].as_slice()).enumerate() {
                if idx % ns != s {
                    worst = worst.max((a - b).norm());
                }
            }
        }
    }
    worst
}

fn gain_scale(states: &[ConsensusState]) -> f64 {
    states
        .iter()
        .flat_map(|st| st.g_local.as_slice().iter())
        .map(|v| v.norm())
        .fold(0.0, f64::max)
}

/// Initial states: MRT beamformers and zero duals. Satellites first exchange
/// their own gains, adopt the neighbours' entries into their copies, then
/// exchange the copies. Returns the scalars sent during both exchanges.
pub fn initialize_states(
    csi: &StatisticalCsi,
    mask: &SchedulingMask,
    budgets: &[f64],
    topology: &IslTopology,
    rho_g: f64,
) -> Result<(Vec<ConsensusState>, BeamformerSet, f64, Vec<u64>)> {
    if topology.n_sats != csi.n_sats() {
        return Err(Error::Topology(format!(
            "topology has {} satellites, CSI has {}",
            topology.n_sats,
            csi.n_sats()
        )));
    }
    if !(rho_g > 0.0) || !rho_g.is_finite() {
        return Err(Error::config("rho_g", "must be positive"));
    }
    let w0 = mrt(csi, mask, budgets)?;
    let g0 = compute_beam_gains(csi, mask, &w0)?;
    let rho = rho_g * reference_penalty(csi, &g0)?;
    let (ns, nu) = (csi.n_sats(), csi.n_users());
    let mut states = (0..ns)
        .map(|s| {
            let mut g = GainTable::zeros(ns, nu);
            for u in 0..nu {
                for l in 0..nu {
                    g.set(s, u, l, g0.get(s, u, l));
                }
            }
            ConsensusState::new(
                s,
                topology.neighbors[s].clone(),
                g,
                rho,
                WmmseAux::neutral(nu),
                w0.w[s].clone(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut counts = exchange(&mut states, topology, mask);
    for st in states.iter_mut() {
        let set = st.consensus_set();
        for (k, &j) in set.iter().enumerate() {
            if j == st.sat {
                continue;
            }
            for u in 0..nu {
                for l in 0..nu {
                    let v = st.snapshots[k].get(j, u, l);
                    st.g_local.set(j, u, l, v);
                }
            }
        }
    }
    for (c, n) in counts.iter_mut().zip(exchange(&mut states, topology, mask)) {
        *c += n;
    }
    Ok((states, w0, rho, counts))
}

/// One synchronous round: local solves, dual updates, exchange.
pub fn consensus_round(
    states: &mut [ConsensusState],
    topology: &IslTopology,
    csi: &StatisticalCsi,
    mask: &SchedulingMask,
    budgets: &[f64],
) -> Result<Vec<u64>> {
    let solutions = states
        .par_iter()
        .map(|st| {
            solve_local(st, csi, mask, budgets[st.sat]).map_err(|e| Error::LocalSolve {
                sat: st.sat,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    states.par_iter_mut().zip(solutions).for_each(|(st, sol)| {
        st.w = sol.w;
        st.g_local = sol.g;
        let s = st.sat;
        let ns = st.g_local.n_sats();
        let rho = st.rho;
        for (dual, snap) in st.duals.iter_mut().zip(&st.snapshots) {
            let pairs = dual
                .as_mut_slice()
                .iter_mut()
                .zip(st.g_local.as_slice().iter().zip(snap.as_slice()));
            for (idx, (z, (x, g))) in pairs.enumerate() {
                if idx % ns != s {
                    *z += (x - g) * rho;
                }
            }
        }
    });
    Ok(exchange(states, topology, mask))
}

fn assemble(states: &[ConsensusState], budgets: &[f64], n_antennas: usize) -> BeamformerSet {
    let nu = states.first().map_or(0, |s| s.w.len());
    let mut w = BeamformerSet::zeros(states.len(), nu, n_antennas, budgets.to_vec());
    for st in states {
        w.w[st.sat] = st.w.clone();
    }
    w
}

/// Decentralized WMMSE over `topology`. Traces are indexed by outer
/// iteration, entry 0 being the MRT starting point.
pub fn run_decentralized(
    csi: &StatisticalCsi,
    mask: &SchedulingMask,
    budgets: &[f64],
    topology: &IslTopology,
    opts: &DecentralizedOptions,
) -> Result<(BeamformerSet, SolveReport, OverheadLedger)> {
    let start = Instant::now();
    let n = csi.n_antennas();
    let n_users = csi.n_users() as f64;
    let (mut states, w0, _rho, init_counts) = initialize_states(csi, mask, budgets, topology, opts.rho_g)?;
    let mut ledger = OverheadLedger::new(csi.n_sats());
    ledger.record_initial(&init_counts);
    ledger.mark();

    let g0 = compute_beam_gains(csi, mask, &w0)?;
    let mut sum_rate_trace = vec![sum_rate(&g0, csi)];
    let mut objective_trace = vec![wmmse_value(&states[0].g_local, csi)];
    let mut residual_trace = vec![primal_residual(&states)];
    let mut max_power_ratio: f64 = 0.0;
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..opts.max_outer {
        states
            .par_iter_mut()
            .map(|st| local_outer_update(st, csi))
            .collect::<Result<Vec<_>>>()?;
        let inner = match opts.schedule {
            Schedule::Flattened => 1,
            Schedule::Nested => opts.max_inner.max(1),
        };
        for _ in 0..inner {
            let counts = consensus_round(&mut states, topology, csi, mask, budgets)?;
            ledger.record_round(&counts);
            let rel = primal_residual(&states) / gain_scale(&states).max(f64::MIN_POSITIVE);
            if rel <= opts.inner_tol {
                break;
            }
        }
        iterations += 1;
        ledger.mark();

        let w = assemble(&states, budgets, n);
        for s in 0..w.n_sats() {
            if budgets[s] > 0.0 {
                max_power_ratio = max_power_ratio.max(w.power(s) / budgets[s]);
            }
        }
        let g = compute_beam_gains(csi, mask, &w)?;
        sum_rate_trace.push(sum_rate(&g, csi));
        let residual = primal_residual(&states);
        residual_trace.push(residual);
        let obj = wmmse_value(&states[0].g_local, csi);
        let prev = *objective_trace.last().expect("non-empty trace");
        objective_trace.push(obj);

        let settled = (prev - obj).abs() <= opts.tol * (n_users - obj).abs().max(f64::MIN_POSITIVE);
        let agreed = residual <= opts.residual_tol * gain_scale(&states).max(f64::MIN_POSITIVE);
        if settled && agreed {
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
        primal_residual_trace: residual_trace,
    };
    Ok((assemble(&states, budgets, n), report, ledger))
}
