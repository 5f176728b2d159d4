//! Signaling-overhead accounting.

use serde::Serialize;

use super::topology::IslTopology;
use crate::scheduling::SchedulingMask;
use crate::{Error, Result};

/// Complex scalars sent by each satellite.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OverheadLedger {
    /// Count of the most recent consensus round.
    pub per_iteration: Vec<u64>,
    /// Running totals including the initial exchange.
    pub cumulative: Vec<u64>,
    pub rounds: usize,
    /// Network-wide cumulative total at each call to [`OverheadLedger::mark`].
    pub history: Vec<u64>,
}

impl OverheadLedger {
    pub fn new(n_sats: usize) -> Self {
        Self {
            per_iteration: vec![0; n_sats],
            cumulative: vec![0; n_sats],
            rounds: 0,
            history: Vec::new(),
        }
    }

    pub fn total(&self) -> u64 {
        self.cumulative.iter().sum()
    }

    pub fn mark(&mut self) {
        self.history.push(self.total());
    }

    /// Adds the counts of the initial exchange to the totals only.
    pub fn record_initial(&mut self, counts: &[u64]) {
        for (c, &n) in self.cumulative.iter_mut().zip(counts) {
            *c += n;
        }
    }

    pub fn record_round(&mut self, counts: &[u64]) {
        self.per_iteration.copy_from_slice(counts);
        self.record_initial(counts);
        self.rounds += 1;
    }
}

/// One row of [`overhead_report`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OverheadRow {
    pub sat: usize,
    pub degree: usize,
    pub load: usize,
    /// `|G_s| |U_s| S U`.
    pub formula: u64,
    pub counted: u64,
    pub cumulative: u64,
}

/// `|G_s| |U_s| S U` for every satellite.
pub fn overhead_formula(topology: &IslTopology, mask: &SchedulingMask) -> Vec<u64> {
    let (ns, nu) = (mask.n_sats() as u64, mask.n_users() as u64);
    (0..topology.n_sats)
        .map(|s| topology.degree(s) as u64 * mask.served[s].len() as u64 * ns * nu)
        .collect()
}

/// Compares the ledger's per-round counts with the closed form.
pub fn overhead_report(
    ledger: &OverheadLedger,
    topology: &IslTopology,
    mask: &SchedulingMask,
) -> Result<Vec<OverheadRow>> {
    let formula = overhead_formula(topology, mask);
    (0..topology.n_sats)
        .map(|s| {
            if ledger.per_iteration[s] != formula[s] {
                return Err(Error::OverheadMismatch {
                    sat: s,
                    formula: formula[s],
                    counted: ledger.per_iteration[s],
                });
            }
            Ok(OverheadRow {
                sat: s,
                degree: topology.degree(s),
                load: mask.served[s].len(),
                formula: formula[s],
                counted: ledger.per_iteration[s],
                cumulative: ledger.cumulative[s],
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decentralized::{build_topology, TopologyKind};

    #[test]
    fn ledger_totals_and_report() {
        let topo = build_topology(&TopologyKind::Star, 3).unwrap();
        let mask = SchedulingMask::from_served(4, vec![vec![0, 1], vec![1, 2], vec![3, 0]]).unwrap();
        let formula = overhead_formula(&topo, &mask);
        assert_eq!(formula, vec![2 * 2 * 3 * 4, 2 * 3 * 4, 2 * 3 * 4]);
        let mut ledger = OverheadLedger::new(3);
        ledger.record_initial(&formula);
        ledger.mark();
        ledger.record_round(&formula);
        ledger.mark();
        assert_eq!(ledger.rounds, 1);
        assert_eq!(ledger.history, vec![96, 192]);
        let rows = overhead_report(&ledger, &topo, &mask).unwrap();
        assert_eq!(rows[0].cumulative, 96);
        ledger.per_iteration[2] += 1;
        assert!(matches!(
            overhead_report(&ledger, &topo, &mask),
            Err(Error::OverheadMismatch { sat: 2, .. })
        ));
    }
}
