//! Configuration, file formats, and experiment orchestration for the
//! `bafdp` simulator. The numerics live in `bafdp-core`.

pub mod config;
pub mod csv_io;
pub mod runner;
pub mod trace_io;

pub use bafdp_core as core;
pub use config::{ConfigError, ConfigIssue, RunConfig};
pub use runner::{compare, execute, prepare, run, sweep, Prepared, RunError, RunOutcome, SweepAxis};
