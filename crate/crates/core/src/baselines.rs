//! Non-cooperative reference precoders.

use nalgebra::SVD;

use crate::beamformer::BeamformerSet;
use crate::centralized::{run_centralized, CentralizedOptions};
use crate::channel::StatisticalCsi;
use crate::scheduling::{sss_assign, SchedulingMask};
use crate::{CMat, CVec, Error, Result, C64};

/// Singular values below this fraction of the largest count as zero when
/// building the zero-forcing null space.
const ZF_RANK_TOL: f64 = 1e-10;

fn check_budgets(csi: &StatisticalCsi, mask: &SchedulingMask, budgets: &[f64]) -> Result<()> {
    if budgets.len() != csi.n_sats() || mask.n_sats() != csi.n_sats() || mask.n_users() != csi.n_users() {
        return Err(Error::Shape("budgets/mask do not match the CSI".into()));
    }
    if budgets.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
        return Err(Error::config("power_budget_dbm", "budgets must be finite"));
    }
    Ok(())
}

fn equal_power(dir: CVec, budget: f64, load: usize) -> CVec {
    let nrm = dir.norm();
    if nrm == 0.0 {
        return dir;
    }
    dir * C64::new((budget / load as f64).sqrt() / nrm, 0.0)
}

/// Maximum-ratio transmission with equal power over the served users.
pub fn mrt(csi: &StatisticalCsi, mask: &SchedulingMask, budgets: &[f64]) -> Result<BeamformerSet> {
    check_budgets(csi, mask, budgets)?;
    let mut w = BeamformerSet::zeros(csi.n_sats(), csi.n_users(), csi.n_antennas(), budgets.to_vec());
    for s in 0..csi.n_sats() {
        let load = mask.served[s].len();
        for &u in &mask.served[s] {
            w.w[s][u] = equal_power(csi.b[s][u].map(|x| x.conj()), budgets[s], load);
        }
    }
    Ok(w)
}

/// Per-satellite zero forcing: each beam is the matched filter projected
/// onto the null space of the other users served by the same satellite,
/// with equal power. Beams whose projection vanishes are left at zero.
pub fn zf(csi: &StatisticalCsi, mask: &SchedulingMask, budgets: &[f64]) -> Result<BeamformerSet> {
    check_budgets(csi, mask, budgets)?;
    let n = csi.n_antennas();
    let mut w = BeamformerSet::zeros(csi.n_sats(), csi.n_users(), n, budgets.to_vec());
    for s in 0..csi.n_sats() {
        let served = &mask.served[s];
        for &u in served {
            let others: Vec<&CVec> = served.iter().filter(|&&j| j != u).map(|&j| &csi.b[s][j]).collect();
            let target = csi.b[s][u].map(|x| x.conj());
            let dir = if others.is_empty() {
                target
            } else {
                let a = CMat::from_fn(n, others.len(), |r, k| others[k][r].conj());
                let svd = SVD::new(a, true, false);
                let u_mat = svd.u.ok_or_else(|| Error::Numeric("SVD failed".into()))?;
                let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
                let mut proj = target.clone();
                for (k, &sv) in svd.singular_values.iter().enumerate() {
                    if sv > ZF_RANK_TOL * smax {
                        let basis = u_mat.column(k);
                        let coef = basis.dotc(&target);
                        proj -= basis * coef;
                    }
                }
                proj
            };
            if dir.norm() <= ZF_RANK_TOL * csi.b[s][u].norm() {
                log::warn!("zero-forcing beam of user {u} at satellite {s} has no room; left at zero");
                continue;
            }
            w.w[s][u] = equal_power(dir, budgets[s], served.len());
        }
    }
    Ok(w)
}

/// Single-satellite serving: every user keeps only its strongest scheduled
/// link and each satellite runs WMMSE on its own users, ignoring the rest of
/// the network. Returns the beamformers and the reduced mask they live on.
pub fn sss(
    csi: &StatisticalCsi,
    mask: &SchedulingMask,
    budgets: &[f64],
    opts: &CentralizedOptions,
) -> Result<(BeamformerSet, SchedulingMask)> {
    check_budgets(csi, mask, budgets)?;
    let single = sss_assign(mask, csi);
    let mut w = BeamformerSet::zeros(csi.n_sats(), csi.n_users(), csi.n_antennas(), budgets.to_vec());
    for s in 0..csi.n_sats() {
        let users = &single.served[s];
        if users.is_empty() {
            continue;
        }
        let sub = csi.restrict(&[s], users);
        let sub_mask = SchedulingMask::full(1, users.len());
        let (ws, _) = run_centralized(&sub, &sub_mask, &budgets[s..=s], opts)?;
        for (k, &u) in users.iter().enumerate() {
            w.w[s][u] = ws.w[0][k].clone();
        }
    }
    Ok((w, single))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn csi2() -> StatisticalCsi {
        let b = vec![vec![
            CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]),
            CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]),
        ]];
        StatisticalCsi::from_parts(
            DMatrix::from_element(1, 2, 1.0),
            DMatrix::from_element(1, 2, 10.0),
            b,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn mrt_uses_full_budget() {
        let csi = csi2();
        let w = mrt(&csi, &SchedulingMask::full(1, 2), &[4.0]).unwrap();
        assert!((w.power(0) - 4.0).abs() < 1e-12);
        assert!((w.w[0][0][0] - C64::new(2f64.sqrt(), 0.0)).norm() < 1e-12);
    }

    #[test]
    fn zf_nulls_co_scheduled_user() {
        let csi = csi2();
        let w = zf(&csi, &SchedulingMask::full(1, 2), &[2.0]).unwrap();
        let leak = crate::linalg::dot_t(&csi.b[0][1], &w.w[0][0]);
        assert!(leak.norm() < 1e-12);
        let leak = crate::linalg::dot_t(&csi.b[0][0], &w.w[0][1]);
        assert!(leak.norm() < 1e-12);
        assert!((w.power(0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zf_with_no_room_leaves_zero() {
        let b = vec![vec![
            CVec::from_vec(vec![C64::new(1.0, 0.0)]),
            CVec::from_vec(vec![C64::new(2.0, 0.0)]),
        ]];
        let csi = StatisticalCsi::from_parts(
            DMatrix::from_element(1, 2, 1.0),
            DMatrix::from_element(1, 2, 10.0),
            b,
            1.0,
        )
        .unwrap();
        let w = zf(&csi, &SchedulingMask::full(1, 2), &[1.0]).unwrap();
        assert_eq!(w.power(0), 0.0);
    }
}
