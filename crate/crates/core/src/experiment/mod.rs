//! Declarative experiment configuration, the end-to-end runner and its
//! machine-readable outputs.

mod config;
mod output;
mod runner;

pub use config::{ExperimentConfig, ExperimentKind, HLadder};
pub use output::{emit_csv, format_float};
pub use runner::{execute, run_experiment, DistanceRow, EpsilonReport, ExperimentReport};
