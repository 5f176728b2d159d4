//! Statistical channel state: Rician link statistics, effective array
//! responses, gain correlations and an instantaneous-channel sampler.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{AodSet, SceneGeometry};
use crate::{CMat, CVec, Error, Result, C64};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Peak amplitude of the `sqrt(3/(2 pi)) cos(theta)` element pattern.
pub fn pattern_peak() -> f64 {
    (3.0 / (2.0 * PI)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    pub n_h: usize,
    pub n_v: usize,
    #[serde(default = "half")]
    pub spacing_over_lambda: f64,
}

fn half() -> f64 {
    0.5
}

impl Default for ArrayConfig {
    fn default() -> Self {
        Self {
            n_h: 4,
            n_v: 4,
            spacing_over_lambda: 0.5,
        }
    }
}

impl ArrayConfig {
    pub fn n_antennas(&self) -> usize {
        self.n_h * self.n_v
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_h < 1 || self.n_v < 1 {
            return Err(Error::config("arrays", "n_h and n_v must be at least 1"));
        }
        if !(self.spacing_over_lambda > 0.0) {
            return Err(Error::config("arrays", "spacing_over_lambda must be positive"));
        }
        Ok(())
    }
}

/// UPA steering vector; entry `k * n_v + m` is `exp(-j 2 pi (phi_h k + phi_v m))`.
pub fn steering_vector(az: f64, el: f64, arr: &ArrayConfig) -> CVec {
    let phi_h = arr.spacing_over_lambda * az.cos() * el.cos();
    let phi_v = arr.spacing_over_lambda * az.sin() * el.cos();
    CVec::from_iterator(
        arr.n_antennas(),
        (0..arr.n_h).flat_map(|k| {
            (0..arr.n_v).map(move |m| C64::from_polar(1.0, -2.0 * PI * (phi_h * k as f64 + phi_v * m as f64)))
        }),
    )
}

/// Element amplitude gain for an off-boresight angle in `[0, pi/2]`.
pub fn radiation_gain(off_boresight: f64) -> Result<f64> {
    // Small tolerance for angles produced by asin/acos rounding.
    const SLACK: f64 = 1e-12;
    if !(-SLACK..=std::f64::consts::FRAC_PI_2 + SLACK).contains(&off_boresight) {
        return Err(Error::Domain { angle: off_boresight });
    }
    let theta = off_boresight.clamp(0.0, std::f64::consts::FRAC_PI_2);
    Ok(pattern_peak() * theta.cos())
}

/// Free-space path gain `(lambda / (4 pi d))^2` for a distance in metres.
pub fn path_gain(distance_m: f64, carrier_hz: f64) -> f64 {
    let lambda = SPEED_OF_LIGHT / carrier_hz;
    (lambda / (4.0 * PI * distance_m)).powi(2)
}

/// Per-component Rician mean and variance for mean power `gamma` and
/// K-factor `kappa` (both linear).
pub fn derive_statistics(gamma: f64, kappa: f64) -> (f64, f64) {
    let alpha_bar = (kappa * gamma / (2.0 * (1.0 + kappa))).sqrt();
    let beta = gamma / (2.0 * (1.0 + kappa));
    (alpha_bar, beta)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Channel-related configuration (the `channel` section of an experiment file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub f_c_hz: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    pub noise_psd_dbm_hz: f64,
    pub kappa_db_range: [f64; 2],
    pub arrays: ArrayConfig,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            f_c_hz: 5e9,
            bandwidth_hz: 20e6,
            noise_figure_db: 10.0,
            noise_psd_dbm_hz: -173.855,
            kappa_db_range: [15.0, 20.0],
            arrays: ArrayConfig::default(),
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_c_hz > 0.0) {
            return Err(Error::config("f_c_hz", "must be positive"));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::config("bandwidth_hz", "must be positive"));
        }
        if !(self.kappa_db_range[0] <= self.kappa_db_range[1]) {
            return Err(Error::config("kappa_db_range", "lower bound exceeds upper bound"));
        }
        self.arrays.validate()
    }
}

/// Thermal noise power in watts: `N0 + 10 log10(B) + F` in dBm.
pub fn noise_power(cfg: &ChannelConfig) -> f64 {
    let dbm = cfg.noise_psd_dbm_hz + 10.0 * cfg.bandwidth_hz.log10() + cfg.noise_figure_db;
    dbm_to_watts(dbm)
}

/// Statistical CSI for `S` satellites and `U` terminals.
#[derive(Debug, Clone, PartialEq)]
pub struct StatisticalCsi {
    pub gamma: DMatrix<f64>,
    pub kappa: DMatrix<f64>,
    pub alpha_bar: DMatrix<f64>,
    pub beta: DMatrix<f64>,
    /// Effective responses `G(theta) a(theta)`, indexed `[s][u]`.
    pub b: Vec<Vec<CVec>>,
    pub noise_power: f64,
}

impl StatisticalCsi {
    /// Assembles the CSI from raw link statistics and responses.
    pub fn from_parts(gamma: DMatrix<f64>, kappa: DMatrix<f64>, b: Vec<Vec<CVec>>, noise_power: f64) -> Result<Self> {
        let (s, u) = gamma.shape();
        if kappa.shape() != (s, u) || b.len() != s || b.iter().any(|row| row.len() != u) {
            return Err(Error::Shape("gamma, kappa and b must be S x U".into()));
        }
        if !(noise_power > 0.0) {
            return Err(Error::config("noise_power", "must be positive"));
        }
        let n = b.first().and_then(|r| r.first()).map_or(0, |v| v.len());
        if b.iter().flatten().any(|v| v.len() != n) {
            return Err(Error::Shape("effective responses differ in length".into()));
        }
        let mut alpha_bar = DMatrix::zeros(s, u);
        let mut beta = DMatrix::zeros(s, u);
        for i in 0..s {
            for j in 0..u {
                let (a, bt) = derive_statistics(gamma[(i, j)], kappa[(i, j)]);
                alpha_bar[(i, j)] = a;
                beta[(i, j)] = bt;
            }
        }
        Ok(Self {
            gamma,
            kappa,
            alpha_bar,
            beta,
            b,
            noise_power,
        })
    }

    pub fn n_sats(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn n_users(&self) -> usize {
        self.gamma.ncols()
    }

    pub fn n_antennas(&self) -> usize {
        self.b.first().and_then(|r| r.first()).map_or(0, |v| v.len())
    }

    /// `T_u = alpha_u alpha_uᵀ + diag(beta_u)` as a real S x S matrix.
    pub fn gain_correlation(&self, u: usize) -> DMatrix<f64> {
        let a = self.alpha_bar.column(u);
        let mut t = a * a.transpose();
        for s in 0..self.n_sats() {
            t[(s, s)] += self.beta[(s, u)];
        }
        t
    }

    /// Same statistics restricted to a subset of satellites and users.
    pub fn restrict(&self, sats: &[usize], users: &[usize]) -> Self {
        let pick = |m: &DMatrix<f64>| DMatrix::from_fn(sats.len(), users.len(), |i, j| m[(sats[i], users[j])]);
        Self {
            gamma: pick(&self.gamma),
            kappa: pick(&self.kappa),
            alpha_bar: pick(&self.alpha_bar),
            beta: pick(&self.beta),
            b: sats
                .iter()
                .map(|&s| users.iter().map(|&u| self.b[s][u].clone()).collect())
                .collect(),
            noise_power: self.noise_power,
        }
    }

    /// Statistics under which the mean/variance/correlation formulas used by
    /// the rate bound are the exact moments of [`sample_instant_channel`]
    /// draws (up to a common phase): `sqrt(2) alpha_bar` and `2 beta`.
    pub fn moment_matched(&self) -> Self {
        let mut out = self.clone();
        out.alpha_bar *= 2f64.sqrt();
        out.beta *= 2.0;
        out
    }
}

/// Per-user gain correlation wrapped as a complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GainCorrelation {
    pub t: CMat,
}

pub fn build_t(csi: &StatisticalCsi, u: usize) -> GainCorrelation {
    GainCorrelation {
        t: csi.gain_correlation(u).map(|v| C64::new(v, 0.0)),
    }
}

/// Builds statistical CSI for a scene: FSPL mean power, Rician K drawn
/// uniformly in dB per link, and pattern-weighted steering vectors.
pub fn build_csi<R: Rng + ?Sized>(
    scene: &SceneGeometry,
    aods: &AodSet,
    cfg: &ChannelConfig,
    rng: &mut R,
) -> Result<StatisticalCsi> {
    cfg.validate()?;
    let (ns, nu) = (scene.n_sats(), scene.n_uts());
    let mut gamma = DMatrix::zeros(ns, nu);
    let mut kappa = DMatrix::zeros(ns, nu);
    let mut b = Vec::with_capacity(ns);
    let [k_lo, k_hi] = cfg.kappa_db_range;
    for s in 0..ns {
        let mut row = Vec::with_capacity(nu);
        for u in 0..nu {
            gamma[(s, u)] = path_gain(scene.distance_km(s, u) * 1e3, cfg.f_c_hz);
            let k_db = k_lo + (k_hi - k_lo) * rng.random::<f64>();
            kappa[(s, u)] = db_to_linear(k_db);
            let g = radiation_gain(aods.off_boresight[(s, u)])?;
            row.push(steering_vector(aods.az[(s, u)], aods.el[(s, u)], &cfg.arrays) * C64::new(g, 0.0));
        }
        b.push(row);
    }
    StatisticalCsi::from_parts(gamma, kappa, b, noise_power(cfg))
}

/// Complex link gains `alpha_{s,u}` with real and imaginary parts drawn
/// independently from `N(alpha_bar, beta)`.
pub fn sample_gains<R: Rng + ?Sized>(csi: &StatisticalCsi, rng: &mut R) -> DMatrix<C64> {
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    DMatrix::from_fn(csi.n_sats(), csi.n_users(), |s, u| {
        let m = csi.alpha_bar[(s, u)];
        let sd = csi.beta[(s, u)].sqrt();
        C64::new(m + sd * std.sample(rng), m + sd * std.sample(rng))
    })
}

/// One instantaneous channel draw `h_{s,u} = alpha_{s,u} b_{s,u}`, indexed `[s][u]`.
pub fn sample_instant_channel<R: Rng + ?Sized>(csi: &StatisticalCsi, rng: &mut R) -> Vec<Vec<CVec>> {
    let alpha = sample_gains(csi, rng);
    (0..csi.n_sats())
        .map(|s| (0..csi.n_users()).map(|u| &csi.b[s][u] * alpha[(s, u)]).collect())
        .collect()
}
