//! Cooperative downlink beamforming for networked LEO satellites.
//!
//! The crate models a static snapshot of a Walker-Delta constellation serving
//! a cluster of single-antenna user terminals, builds statistical channel
//! state (Rician mean/variance per link plus effective array responses), and
//! optimizes per-satellite beamformers for the ergodic sum rate under
//! per-satellite power budgets.
//!
//! Three solvers share one set of building blocks:
//!
//! * [`centralized`]: WMMSE outer loop with an exact block-coordinate descent
//!   beamformer update.
//! * [`decentralized`]: WMMSE combined with consensus ADMM over an arbitrary
//!   connected inter-satellite-link graph, each satellite exchanging only
//!   antenna-count-independent gain vectors with its neighbours.
//! * [`local_solver`]: the per-satellite update of the decentralized scheme,
//!   which eliminates the consensus copies in closed form and recovers the
//!   beamformers from one eigendecomposition per block plus a scalar line
//!   search.
//!
//! [`experiment`] wires everything into reproducible drops, sweeps, CSV traces
//! and a self-validation suite used by the `leocoopbf` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baselines;
pub mod beamformer;
pub mod centralized;
pub mod channel;
pub mod decentralized;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod linalg;
pub mod local_solver;
pub mod rates;
pub mod scheduling;

pub use beamformer::BeamformerSet;
pub use channel::{ArrayConfig, StatisticalCsi};
pub use error::{Error, Result};
pub use rates::{GainTable, WmmseAux};
pub use scheduling::SchedulingMask;

/// Complex double used throughout.
pub type C64 = num_complex::Complex64;
/// Dynamically sized complex column vector.
pub type CVec = nalgebra::DVector<C64>;
/// Dynamically sized complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
