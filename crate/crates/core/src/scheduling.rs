//! User scheduling: which terminals each satellite serves.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::StatisticalCsi;
use crate::{Error, Result};

/// Binary scheduler `delta[s][u]` together with the per-satellite served sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchedulingMask {
    pub delta: Vec<Vec<bool>>,
    /// Ascending user indices served by each satellite.
    pub served: Vec<Vec<usize>>,
}

impl SchedulingMask {
    pub fn from_served(n_users: usize, mut served: Vec<Vec<usize>>) -> Result<Self> {
        let mut delta = vec![vec![false; n_users]; served.len()];
        for (s, set) in served.iter_mut().enumerate() {
            set.sort_unstable();
            set.dedup();
            for &u in set.iter() {
                if u >= n_users {
                    return Err(Error::Shape(format!("user {u} out of range at satellite {s}")));
                }
                delta[s][u] = true;
            }
        }
        Ok(Self { delta, served })
    }

    pub fn full(n_sats: usize, n_users: usize) -> Self {
        Self {
            delta: vec![vec![true; n_users]; n_sats],
            served: vec![(0..n_users).collect(); n_sats],
        }
    }

    pub fn n_sats(&self) -> usize {
        self.delta.len()
    }

    pub fn n_users(&self) -> usize {
        self.delta.first().map_or(0, |r| r.len())
    }

    pub fn max_load(&self) -> usize {
        self.served.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Checks the load bound and that `served` mirrors `delta`.
    pub fn validate(&self, u_max: usize) -> Result<()> {
        for (s, set) in self.served.iter().enumerate() {
            if set.len() > u_max {
                return Err(Error::Shape(format!(
                    "satellite {s} serves {} users, above the cap {u_max}",
                    set.len()
                )));
            }
            let from_delta: Vec<usize> = (0..self.n_users()).filter(|&u| self.delta[s][u]).collect();
            if &from_delta != set {
                return Err(Error::Shape(format!(
                    "served set of satellite {s} disagrees with delta"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchedulerKind {
    Cs,
    Rs,
}

/// Normalized correlation `|b_iᴴ b_j| / (||b_i|| ||b_j||)`, zero for null responses.
pub fn normalized_correlation(a: &crate::CVec, b: &crate::CVec) -> f64 {
    let den = a.norm() * b.norm();
    if den == 0.0 {
        return 0.0;
    }
    a.dotc(b).norm() / den
}

/// Greedy correlation-based scheduling: seed with the strongest link, then
/// repeatedly add the candidate with the smallest worst-case correlation to
/// the users already picked.
pub fn schedule_cs(csi: &StatisticalCsi, u_max: usize) -> Result<SchedulingMask> {
    let n_users = csi.n_users();
    if n_users == 0 {
        return Err(Error::config("ut_count", "must be at least 1"));
    }
    let take = u_max.min(n_users);
    let mut served = Vec::with_capacity(csi.n_sats());
    for s in 0..csi.n_sats() {
        let row = &csi.b[s];
        let mut picked: Vec<usize> = Vec::with_capacity(take);
        if take > 0 {
            let seed = (0..n_users).fold(0, |best, u| {
                if csi.gamma[(s, u)] > csi.gamma[(s, best)] {
                    u
                } else {
                    best
                }
            });
            picked.push(seed);
        }
        let mut worst = vec![0.0f64; n_users];
        while picked.len() < take {
            let last = *picked.last().unwrap();
            for u in 0..n_users {
                worst[u] = worst[u].max(normalized_correlation(&row[u], &row[last]));
            }
            let next = (0..n_users)
                .filter(|u| !picked.contains(u))
                .fold(None::<usize>, |best, u| match best {
                    Some(b) if worst[b] <= worst[u] => Some(b),
                    _ => Some(u),
                })
                .expect("candidates remain while picked < take <= n_users");
            picked.push(next);
        }
        served.push(picked);
    }
    SchedulingMask::from_served(n_users, served)
}

/// Uniform random `u_max`-subset per satellite.
pub fn schedule_rs<R: Rng + ?Sized>(
    n_sats: usize,
    n_users: usize,
    u_max: usize,
    rng: &mut R,
) -> Result<SchedulingMask> {
    if u_max > n_users {
        return Err(Error::config(
            "u_max",
            format!("{u_max} exceeds the {n_users} terminals"),
        ));
    }
    let served = (0..n_sats)
        .map(|_| rand::seq::index::sample(rng, n_users, u_max).into_vec())
        .collect();
    SchedulingMask::from_served(n_users, served)
}

/// Keeps each terminal only on its strongest scheduled link (ties to the
/// lowest satellite index).
pub fn sss_assign(mask: &SchedulingMask, csi: &StatisticalCsi) -> SchedulingMask {
    let (ns, nu) = (mask.n_sats(), mask.n_users());
    let mut delta = vec![vec![false; nu]; ns];
    for u in 0..nu {
        let best = (0..ns)
            .filter(|&s| mask.delta[s][u])
            .fold(None::<usize>, |best, s| match best {
                Some(b) if csi.gamma[(b, u)] >= csi.gamma[(s, u)] => Some(b),
                _ => Some(s),
            });
        if let Some(s) = best {
            delta[s][u] = true;
        }
    }
    let served = delta.iter().map(|row| (0..nu).filter(|&u| row[u]).collect()).collect();
    SchedulingMask { delta, served }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{CVec, C64};
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn csi_with(b: Vec<Vec<CVec>>, gamma: DMatrix<f64>) -> StatisticalCsi {
        let (s, u) = gamma.shape();
        StatisticalCsi::from_parts(gamma, DMatrix::from_element(s, u, 10.0), b, 1.0).unwrap()
    }

    fn v(re: &[f64]) -> CVec {
        CVec::from_iterator(re.len(), re.iter().map(|&x| C64::new(x, 0.0)))
    }

    #[test]
    fn cs_schedules_everyone_when_under_cap() {
        let b = vec![vec![v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[1.0, 1.0])]];
        let csi = csi_with(b, DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]));
        let m = schedule_cs(&csi, 5).unwrap();
        assert_eq!(m.served, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn cs_prefers_orthogonal_candidate() {
        // Seed is user 0 (strongest); user 1 is collinear, user 2 orthogonal.
        let b = vec![vec![v(&[1.0, 0.0]), v(&[2.0, 0.0]), v(&[0.0, 1.0])]];
        let csi = csi_with(b, DMatrix::from_row_slice(1, 3, &[3.0, 1.0, 1.0]));
        let m = schedule_cs(&csi, 2).unwrap();
        assert_eq!(m.served, vec![vec![0, 2]]);
    }

    #[test]
    fn cs_ties_go_to_lowest_index() {
        let b = vec![vec![v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[0.0, 1.0])]];
        let csi = csi_with(b, DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]));
        let m = schedule_cs(&csi, 2).unwrap();
        assert_eq!(m.served, vec![vec![0, 1]]);
    }

    #[test]
    fn rs_full_and_reproducible() {
        let m = schedule_rs(3, 4, 4, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(m, SchedulingMask::full(3, 4));
        let a = schedule_rs(3, 10, 4, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = schedule_rs(3, 10, 4, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
        a.validate(4).unwrap();
        assert!(schedule_rs(1, 3, 4, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn rs_inclusion_frequency() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (n, k, draws) = (10, 3, 10_000);
        let mut counts = vec![0usize; n];
        for _ in 0..draws {
            let m = schedule_rs(1, n, k, &mut rng).unwrap();
            for &u in &m.served[0] {
                counts[u] += 1;
            }
        }
        for c in counts {
            let f = c as f64 / draws as f64;
            assert!((f - 0.3).abs() < 0.02, "{f}");
        }
    }

    #[test]
    fn sss_keeps_strongest_with_ties_low() {
        let b = vec![vec![v(&[1.0])]; 3];
        let csi = csi_with(b, DMatrix::from_column_slice(3, 1, &[1e-16, 2e-16, 2e-16]));
        let m = sss_assign(&SchedulingMask::full(3, 1), &csi);
        assert_eq!(m.served, vec![vec![], vec![0], vec![]]);

        let single = SchedulingMask::from_served(1, vec![vec![], vec![], vec![0]]).unwrap();
        assert_eq!(sss_assign(&single, &csi), single);
    }
}
