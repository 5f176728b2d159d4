//! Inter-satellite-link graphs.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Topology selector as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TopologyKind {
    Ring,
    Star,
    Mesh,
    Custom { edges: Vec<[usize; 2]> },
}

impl TopologyKind {
    pub fn name(&self) -> &'static str {
        match self {
            TopologyKind::Ring => "ring",
            TopologyKind::Star => "star",
            TopologyKind::Mesh => "mesh",
            TopologyKind::Custom { .. } => "custom",
        }
    }
}

/// Undirected connected graph over the serving satellites.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IslTopology {
    pub n_sats: usize,
    /// Edges stored as `(min, max)`.
    pub edges: BTreeSet<(usize, usize)>,
    /// Ascending neighbour lists `G_s`.
    pub neighbors: Vec<Vec<usize>>,
}

impl IslTopology {
    pub fn from_edges(n_sats: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n_sats < 2 {
            return Err(Error::Topology(format!("need at least 2 satellites, got {n_sats}")));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::Topology(format!("self-loop at satellite {a}")));
            }
            if a >= n_sats || b >= n_sats {
                return Err(Error::Topology(format!("edge ({a}, {b}) outside 0..{n_sats}")));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let mut neighbors = vec![Vec::new(); n_sats];
        for &(a, b) in &set {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for n in &mut neighbors {
            n.sort_unstable();
        }
        let topo = Self {
            n_sats,
            edges: set,
            neighbors,
        };
        if !topo.is_connected() {
            return Err(Error::Topology("graph is not connected".into()));
        }
        Ok(topo)
    }

    pub fn degree(&self, s: usize) -> usize {
        self.neighbors[s].len()
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n_sats];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for &n in &self.neighbors[v] {
                if !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
        seen.into_iter().all(|x| x)
    }
}

pub fn build_topology(kind: &TopologyKind, n_sats: usize) -> Result<IslTopology> {
    let edges: Vec<(usize, usize)> = match kind {
        TopologyKind::Ring => (0..n_sats)
            .map(|i| (i, (i + 1) % n_sats))
            .filter(|(a, b)| a != b)
            .collect(),
        TopologyKind::Star => (1..n_sats).map(|i| (0, i)).collect(),
        TopologyKind::Mesh => (0..n_sats).flat_map(|a| (a + 1..n_sats).map(move |b| (a, b))).collect(),
        TopologyKind::Custom { edges } => edges.iter().map(|e| (e[0], e[1])).collect(),
    };
    IslTopology::from_edges(n_sats, edges)
}
