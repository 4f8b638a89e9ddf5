//! Workload configuration, simulation runs, sweeps, baseline comparisons and
//! report files for the epochsim simulator.

pub mod commands;
pub mod config;
pub mod error;
pub mod presets;
pub mod report;
pub mod run;

pub use config::{Workload, WorkloadConfig};
pub use error::CliError;
pub use report::SimReport;
