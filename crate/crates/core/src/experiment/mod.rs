//! Configuration-driven experiments: drops, solver runs, sweeps and the
//! validation suite.

pub mod config;
pub mod runner;
pub mod synthetic;
pub mod validate;

pub use config::{ExperimentConfig, SchedulerConfig, SolverKind, SweepAxis, SweepConfig, Tolerances};
pub use runner::{
    build_drop, cmd_simulate, cmd_sweep, drop_rng, run_drop, run_solver, Drop, RunRecord, SolverOutcome, SweepOutput,
    SweepRow, TraceRow,
};
pub use validate::{cmd_validate, CheckResult, Level, ValidateOptions};
