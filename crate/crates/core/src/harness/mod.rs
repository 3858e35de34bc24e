//! Configuration, experiment orchestration, PDE-versus-ODE comparison and
//! diagnostics.

pub mod compare;
pub mod config;
pub mod diagnose;
pub mod output;
pub mod run;

pub use compare::{compare, ComparisonReport};
pub use config::{ExperimentKind, RunConfig};
pub use diagnose::{diagnose, Diagnostics};
pub use run::{execute, run_experiment, sweep, RunOutcome, SweepSummary};
