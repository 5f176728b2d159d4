//! Per-satellite local update of the decentralized scheme.
//!
//! The local augmented Lagrangian is jointly convex in the own beamformers
//! and the consensus copies. The copies are eliminated in closed form
//! ([`elimination`]), leaving a block-diagonal quadratic in the beamformers
//! that is solved through eigendecompositions and a scalar search
//! ([`ball`]). [`oracle`] holds dense reference solvers.

pub mod ball;
pub mod elimination;
pub mod oracle;

pub use ball::{solve_ball_constrained, BallSolution, ReducedQuadratic, SpectralQuadratic};
pub use elimination::{assemble_reduced, build_operators, eliminate_g, EliminationOperators};
pub use oracle::{generic_local_oracle, OracleSolution};

use crate::channel::StatisticalCsi;
use crate::decentralized::ConsensusState;
use crate::rates::{upsilon, GainTable};
use crate::scheduling::SchedulingMask;
use crate::{CVec, Result};

/// Local augmented Lagrangian at copy `g`: `sum_u nu_u Upsilon_u` plus the
/// dual and penalty terms of every consensus constraint.
pub fn local_lagrangian(state: &ConsensusState, csi: &StatisticalCsi, g: &GainTable) -> f64 {
    let mse: f64 = (0..csi.n_users())
        .map(|u| state.aux.nu[u] * upsilon(state.aux.mu[u], g, csi, u))
        .sum();
    mse + state.consensus_penalty(g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalSolution {
    /// Own beamformers indexed by user, zero where not served.
    pub w: Vec<CVec>,
    pub g: GainTable,
    pub lambda: f64,
}

/// Exact minimizer of the local augmented Lagrangian of `state.sat`.
pub fn solve_local(
    state: &ConsensusState,
    csi: &StatisticalCsi,
    mask: &SchedulingMask,
    budget: f64,
) -> Result<LocalSolution> {
    let ops = build_operators(state, csi, mask)?;
    let quad = assemble_reduced(&ops, state, csi, mask, budget);
    let sol = solve_ball_constrained(&quad)?;
    let mut w = vec![CVec::zeros(csi.n_antennas()); csi.n_users()];
    for (&l, v) in quad.users.iter().zip(sol.w) {
        w[l] = v;
    }
    let g = ops.apply(csi, &w);
    Ok(LocalSolution {
        w,
        g,
        lambda: sol.lambda,
    })
}
