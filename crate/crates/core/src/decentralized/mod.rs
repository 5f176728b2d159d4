//! Decentralized cooperative beamforming over inter-satellite links.

pub mod engine;
pub mod overhead;
pub mod state;
pub mod topology;

pub use engine::{
    consensus_round, initialize_states, local_outer_update, primal_residual, reference_penalty, run_decentralized,
    DecentralizedOptions, Schedule,
};
pub use overhead::{overhead_formula, overhead_report, OverheadLedger, OverheadRow};
pub use state::ConsensusState;
pub use topology::{build_topology, IslTopology, TopologyKind};
