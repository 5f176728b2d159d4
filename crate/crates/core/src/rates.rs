//! Beam-domain gains, the hardening-bound rate, the WMMSE surrogate and its
//! closed-form auxiliary updates, plus a Monte-Carlo ergodic-rate estimator.
//!
//! Rates are reported in bits/s/Hz; the WMMSE surrogate uses natural logs.

use rand::Rng;

use crate::beamformer::BeamformerSet;
use crate::channel::{sample_gains, StatisticalCsi};
use crate::linalg::dot_t;
use crate::scheduling::SchedulingMask;
use crate::{Error, Result, C64};

/// Table of S-vectors `g_{u,l}`, entry `[s]` being `b_{s,u}ᵀ delta_{s,l} w_{s,l}`.
///
/// Laid out so that each `g_{u,l}` is a contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct GainTable {
    n_sats: usize,
    n_users: usize,
    data: Vec<C64>,
}

impl GainTable {
    pub fn zeros(n_sats: usize, n_users: usize) -> Self {
        Self {
            n_sats,
            n_users,
            data: vec![C64::new(0.0, 0.0); n_sats * n_users * n_users],
        }
    }

    pub fn n_sats(&self) -> usize {
        self.n_sats
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    #[inline]
    fn offset(&self, u: usize, l: usize) -> usize {
        (u * self.n_users + l) * self.n_sats
    }

    #[inline]
    pub fn get(&self, i: usize, u: usize, l: usize) -> C64 {
        self.data[self.offset(u, l) + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, u: usize, l: usize, v: C64) {
        let o = self.offset(u, l);
        self.data[o + i] = v;
    }

    pub fn vec(&self, u: usize, l: usize) -> &[C64] {
        let o = self.offset(u, l);
        &self.data[o..o + self.n_sats]
    }

    pub fn vec_mut(&mut self, u: usize, l: usize) -> &mut [C64] {
        let o = self.offset(u, l);
        &mut self.data[o..o + self.n_sats]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &GainTable) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Receive scalars `mu_u` and MSE weights `nu_u`.
#[derive(Debug, Clone, PartialEq)]
pub struct WmmseAux {
    pub mu: Vec<C64>,
    pub nu: Vec<f64>,
}

impl WmmseAux {
    /// `mu = 0`, `nu = 1`.
    pub fn neutral(n_users: usize) -> Self {
        Self {
            mu: vec![C64::new(0.0, 0.0); n_users],
            nu: vec![1.0; n_users],
        }
    }

    /// Closed-form optimum for the given gains.
    pub fn optimal(g: &GainTable, csi: &StatisticalCsi) -> Result<Self> {
        let mu = update_mu(g, csi);
        let nu = update_nu(&mu, g, csi)?;
        Ok(Self { mu, nu })
    }
}

pub fn compute_beam_gains(csi: &StatisticalCsi, mask: &SchedulingMask, w: &BeamformerSet) -> Result<GainTable> {
    let (ns, nu) = (csi.n_sats(), csi.n_users());
    if mask.n_sats() != ns || mask.n_users() != nu {
        return Err(Error::Shape(format!("mask is not {ns} x {nu}")));
    }
    w.check_shape(ns, nu, csi.n_antennas())?;
    let mut g = GainTable::zeros(ns, nu);
    for s in 0..ns {
        for &l in &mask.served[s] {
            for u in 0..nu {
                g.set(s, u, l, dot_t(&csi.b[s][u], &w.w[s][l]));
            }
        }
    }
    Ok(g)
}

/// `sum_s alpha_{s,u} g_{s,u,u}`: the mean useful coefficient.
pub fn useful_mean(g: &GainTable, csi: &StatisticalCsi, u: usize) -> C64 {
    g.vec(u, u)
        .iter()
        .enumerate()
        .map(|(s, v)| v * csi.alpha_bar[(s, u)])
        .sum()
}

/// `g_{u,l}ᴴ T_u g_{u,l}` evaluated without forming `T_u`.
pub fn correlation_form(g: &GainTable, csi: &StatisticalCsi, u: usize, l: usize) -> f64 {
    let v = g.vec(u, l);
    let mean: C64 = v.iter().enumerate().map(|(s, x)| x * csi.alpha_bar[(s, u)]).sum();
    let scatter: f64 = v.iter().enumerate().map(|(s, x)| csi.beta[(s, u)] * x.norm_sqr()).sum();
    mean.norm_sqr() + scatter
}

/// Gain fluctuation + inter-user interference + noise seen by user `u`.
pub fn psi(g: &GainTable, csi: &StatisticalCsi, u: usize) -> f64 {
    let own: f64 = g
        .vec(u, u)
        .iter()
        .enumerate()
        .map(|(s, x)| csi.beta[(s, u)] * x.norm_sqr())
        .sum();
    let interference: f64 = (0..csi.n_users())
        .filter(|&l| l != u)
        .map(|l| correlation_form(g, csi, u, l))
        .sum();
    own + interference + csi.noise_power
}

/// Per-user SINR of the hardening bound.
pub fn sinr(g: &GainTable, csi: &StatisticalCsi) -> Vec<f64> {
    (0..csi.n_users())
        .map(|u| useful_mean(g, csi, u).norm_sqr() / psi(g, csi, u))
        .collect()
}

/// Hardening-bound rate per user (bits/s/Hz).
pub fn rate_lower_bound(g: &GainTable, csi: &StatisticalCsi) -> Vec<f64> {
    sinr(g, csi).into_iter().map(|x| (1.0 + x).log2()).collect()
}

pub fn sum_rate(g: &GainTable, csi: &StatisticalCsi) -> f64 {
    rate_lower_bound(g, csi).iter().sum()
}

/// Sum rate of a beamformer set (bits/s/Hz).
pub fn sum_rate_of(csi: &StatisticalCsi, mask: &SchedulingMask, w: &BeamformerSet) -> Result<f64> {
    Ok(sum_rate(&compute_beam_gains(csi, mask, w)?, csi))
}

/// MSE term `|1 - mu m_u|^2 + |mu|^2 Psi_u`.
pub fn upsilon(mu: C64, g: &GainTable, csi: &StatisticalCsi, u: usize) -> f64 {
    (C64::new(1.0, 0.0) - mu * useful_mean(g, csi, u)).norm_sqr() + mu.norm_sqr() * psi(g, csi, u)
}

/// `sum_u (nu_u Upsilon_u - ln nu_u)`.
pub fn wmmse_objective(aux: &WmmseAux, g: &GainTable, csi: &StatisticalCsi) -> f64 {
    (0..csi.n_users())
        .map(|u| aux.nu[u] * upsilon(aux.mu[u], g, csi, u) - aux.nu[u].ln())
        .sum()
}

/// The WMMSE objective at the optimal `mu`, `nu`: `U - sum_u ln(1 + SINR_u)`.
pub fn wmmse_value(g: &GainTable, csi: &StatisticalCsi) -> f64 {
    sinr(g, csi).into_iter().map(|x| 1.0 - (1.0 + x).ln()).sum()
}

pub fn update_mu(g: &GainTable, csi: &StatisticalCsi) -> Vec<C64> {
    (0..csi.n_users())
        .map(|u| {
            let m = useful_mean(g, csi, u);
            m.conj() / (m.norm_sqr() + psi(g, csi, u))
        })
        .collect()
}

pub fn update_nu(mu: &[C64], g: &GainTable, csi: &StatisticalCsi) -> Result<Vec<f64>> {
    (0..csi.n_users())
        .map(|u| {
            let y = upsilon(mu[u], g, csi, u);
            if !(y > 0.0) || !y.is_finite() {
                return Err(Error::Degenerate {
                    user: u,
                    reason: format!("MSE term {y}"),
                });
            }
            Ok(1.0 / y)
        })
        .collect()
}

/// Sample mean and standard error of a per-user quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Ergodic rate with receiver-side channel knowledge,
/// `E[log2(1 + |Gamma_uu|^2 / (sum_{l != u} |Gamma_ul|^2 + sigma^2))]`, over
/// draws of the link gains.
pub fn monte_carlo_rate<R: Rng + ?Sized>(
    csi: &StatisticalCsi,
    mask: &SchedulingMask,
    w: &BeamformerSet,
    n_samples: usize,
    rng: &mut R,
) -> Result<Vec<McEstimate>> {
    if n_samples < 1000 {
        return Err(Error::config("n_samples", "at least 1000 samples are required"));
    }
    let g = compute_beam_gains(csi, mask, w)?;
    let (ns, nu) = (csi.n_sats(), csi.n_users());
    let mut sum = vec![0.0; nu];
    let mut sum_sq = vec![0.0; nu];
    for _ in 0..n_samples {
        let alpha = sample_gains(csi, rng);
        for u in 0..nu {
            let mut signal = 0.0;
            let mut interference = 0.0;
            for l in 0..nu {
                let gv = g.vec(u, l);
                let coef: C64 = (0..ns).map(|s| alpha[(s, u)] * gv[s]).sum();
                if l == u {
                    signal = coef.norm_sqr();
                } else {
                    interference += coef.norm_sqr();
                }
            }
            let r = (1.0 + signal / (interference + csi.noise_power)).log2();
            sum[u] += r;
            sum_sq[u] += r * r;
        }
    }
    let n = n_samples as f64;
    Ok((0..nu)
        .map(|u| {
            let mean = sum[u] / n;
            let var = ((sum_sq[u] / n - mean * mean) * n / (n - 1.0)).max(0.0);
            McEstimate {
                mean,
                stderr: (var / n).sqrt(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{CVec, C64};
    use nalgebra::DMatrix;

    fn scalar_csi(alpha: f64, beta: f64, b: f64, sigma2: f64) -> StatisticalCsi {
        let mut csi = StatisticalCsi::from_parts(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            vec![vec![CVec::from_element(1, C64::new(b, 0.0))]],
            sigma2,
        )
        .unwrap();
        csi.alpha_bar[(0, 0)] = alpha;
        csi.beta[(0, 0)] = beta;
        csi
    }

    fn scalar_w(w: f64) -> BeamformerSet {
        let mut set = BeamformerSet::zeros(1, 1, 1, vec![10.0]);
        set.w[0][0][0] = C64::new(w, 0.0);
        set
    }

    #[test]
    fn scalar_gain_product() {
        let csi = scalar_csi(1.0, 0.0, 2.0, 1.0);
        let g = compute_beam_gains(&csi, &SchedulingMask::full(1, 1), &scalar_w(3.0)).unwrap();
        assert_eq!(g.get(0, 0, 0), C64::new(6.0, 0.0));
    }

    #[test]
    fn zero_beams_zero_rate() {
        let csi = scalar_csi(1.0, 0.5, 2.0, 1.0);
        let g = compute_beam_gains(&csi, &SchedulingMask::full(1, 1), &scalar_w(0.0)).unwrap();
        assert!(g.as_slice().iter().all(|v| v.norm() == 0.0));
        assert_eq!(rate_lower_bound(&g, &csi), vec![0.0]);
    }

    #[test]
    fn unit_snr_gives_one_bit() {
        let csi = scalar_csi(1.0, 0.0, 1.0, 1.0);
        let g = compute_beam_gains(&csi, &SchedulingMask::full(1, 1), &scalar_w(1.0)).unwrap();
        assert!((rate_lower_bound(&g, &csi)[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn neutral_aux_objective_is_user_count() {
        let csi = scalar_csi(1.0, 0.3, 1.0, 1.0);
        let g = compute_beam_gains(&csi, &SchedulingMask::full(1, 1), &scalar_w(0.7)).unwrap();
        assert!((wmmse_objective(&WmmseAux::neutral(1), &g, &csi) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hand_computed_updates() {
        let csi = scalar_csi(1.0, 0.0, 1.0, 1.0);
        let g = compute_beam_gains(&csi, &SchedulingMask::full(1, 1), &scalar_w(1.0)).unwrap();
        let mu = update_mu(&g, &csi);
        assert!((mu[0] - C64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((upsilon(mu[0], &g, &csi, 0) - 0.5).abs() < 1e-15);
        let nu = update_nu(&mu, &g, &csi).unwrap();
        assert!((nu[0] - 2.0).abs() < 1e-15);

        let zero = compute_beam_gains(&csi, &SchedulingMask::full(1, 1), &scalar_w(0.0)).unwrap();
        let mu = update_mu(&zero, &csi);
        assert_eq!(mu[0], C64::new(0.0, 0.0));
        assert_eq!(update_nu(&mu, &zero, &csi).unwrap(), vec![1.0]);
    }

    #[test]
    fn small_sample_count_rejected() {
        let csi = scalar_csi(1.0, 0.0, 1.0, 1.0);
        let mut rng = rand::rng();
        assert!(monte_carlo_rate(&csi, &SchedulingMask::full(1, 1), &scalar_w(1.0), 10, &mut rng).is_err());
    }
}
