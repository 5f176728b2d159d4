use crate::scheduling::SchedulingMask;
use crate::{CVec, Error, Result, C64};

/// Per-satellite beamformers `w_{s,u}` with their power budgets.
///
/// Stored densely as `[s][u]`; entries of unscheduled pairs are kept at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    pub w: Vec<Vec<CVec>>,
    pub power_budget: Vec<f64>,
}

impl BeamformerSet {
    pub fn zeros(n_sats: usize, n_users: usize, n_ant: usize, power_budget: Vec<f64>) -> Self {
        assert_eq!(power_budget.len(), n_sats);
        Self {
            w: vec![vec![CVec::zeros(n_ant); n_users]; n_sats],
            power_budget,
        }
    }

    pub fn n_sats(&self) -> usize {
        self.w.len()
    }

    pub fn n_users(&self) -> usize {
        self.w.first().map_or(0, |r| r.len())
    }

    pub fn n_antennas(&self) -> usize {
        self.w.first().and_then(|r| r.first()).map_or(0, |v| v.len())
    }

    pub fn power(&self, s: usize) -> f64 {
        self.w[s].iter().map(|v| v.norm_squared()).sum()
    }

    /// Checks `sum_u ||w_{s,u}||^2 <= P_s (1 + rel_tol)` for every satellite.
    pub fn is_feasible(&self, rel_tol: f64) -> bool {
        (0..self.n_sats()).all(|s| self.power(s) <= self.power_budget[s] * (1.0 + rel_tol))
    }

    /// Zeros every entry the mask does not schedule.
    pub fn apply_mask(&mut self, mask: &SchedulingMask) {
        for (s, row) in self.w.iter_mut().enumerate() {
            for (u, v) in row.iter_mut().enumerate() {
                if !mask.delta[s][u] {
                    v.fill(C64::new(0.0, 0.0));
                }
            }
        }
    }

    pub fn check_shape(&self, n_sats: usize, n_users: usize, n_ant: usize) -> Result<()> {
        if self.n_sats() != n_sats
            || self.w.iter().any(|r| r.len() != n_users)
            || self.w.iter().flatten().any(|v| v.len() != n_ant)
        {
            return Err(Error::Shape(format!(
                "beamformers are not {n_sats} x {n_users} x {n_ant}"
            )));
        }
        Ok(())
    }
}
