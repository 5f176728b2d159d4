//! Random instances in normalized units (unit noise, order-one gains), used
//! by the validation suite and by tests that need many small problems.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::StatisticalCsi;
use crate::decentralized::ConsensusState;
use crate::rates::{GainTable, WmmseAux};
use crate::scheduling::SchedulingMask;
use crate::{CVec, Result, C64};

pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVec {
    CVec::from_fn(n, |_, _| complex_normal(rng))
}

/// CSI with `gamma` in [0.5, 2], `kappa` in [1, 10], Gaussian responses and
/// unit noise.
pub fn random_csi<R: Rng + ?Sized>(n_sats: usize, n_ant: usize, n_users: usize, rng: &mut R) -> Result<StatisticalCsi> {
    let gamma = DMatrix::from_fn(n_sats, n_users, |_, _| rng.random_range(0.5..2.0));
    let kappa = DMatrix::from_fn(n_sats, n_users, |_, _| rng.random_range(1.0..10.0));
    let b = (0..n_sats)
        .map(|_| (0..n_users).map(|_| random_vector(n_ant, rng)).collect())
        .collect();
    StatisticalCsi::from_parts(gamma, kappa, b, 1.0)
}

/// Each satellite serves `load` users drawn uniformly.
pub fn random_mask<R: Rng + ?Sized>(n_sats: usize, n_users: usize, load: usize, rng: &mut R) -> Result<SchedulingMask> {
    let served = (0..n_sats)
        .map(|_| rand::seq::index::sample(rng, n_users, load.min(n_users)).into_vec())
        .collect();
    SchedulingMask::from_served(n_users, served)
}

/// Gain table respecting the mask's structural zeros.
pub fn random_table<R: Rng + ?Sized>(mask: &SchedulingMask, rng: &mut R) -> GainTable {
    let (ns, nu) = (mask.n_sats(), mask.n_users());
    let mut g = GainTable::zeros(ns, nu);
    for u in 0..nu {
        for l in 0..nu {
            for i in 0..ns {
                if mask.delta[i][l] {
                    g.set(i, u, l, complex_normal(rng));
                }
            }
        }
    }
    g
}

/// Consensus state of satellite `sat` with random auxiliaries, snapshots,
/// duals and own beamformers; neighbours are all other satellites.
pub fn random_state<R: Rng + ?Sized>(
    csi: &StatisticalCsi,
    mask: &SchedulingMask,
    sat: usize,
    rho: f64,
    rng: &mut R,
) -> Result<ConsensusState> {
    let (ns, nu, n) = (csi.n_sats(), csi.n_users(), csi.n_antennas());
    let aux = WmmseAux {
        mu: (0..nu).map(|_| complex_normal(rng)).collect(),
        nu: (0..nu).map(|_| rng.random_range(0.5..2.0)).collect(),
    };
    let w = (0..nu)
        .map(|u| {
            if mask.delta[sat][u] {
                random_vector(n, rng)
            } else {
                CVec::zeros(n)
            }
        })
        .collect();
    let neighbors = (0..ns).filter(|&j| j != sat).collect();
    let mut st = ConsensusState::new(sat, neighbors, random_table(mask, rng), rho, aux, w)?;
    for k in 0..st.snapshots.len() {
        st.snapshots[k] = random_table(mask, rng);
        st.duals[k] = random_table(mask, rng);
    }
    Ok(st)
}
