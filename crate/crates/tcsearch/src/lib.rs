//! Std companion to `tcsearch-core`: file formats, the batch experiment
//! harness and the command-line configuration.

pub mod config;
pub mod formats;
pub mod harness;

pub use harness::{emit_outputs, run_experiment, AggregateReport, EstimatorChoice, ExperimentSpec};
