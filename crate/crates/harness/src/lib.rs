//! Experiment harness: configuration, sweeps, results CSV and plot data.

pub mod cli;
pub mod config;
pub mod figures;
pub mod results;
pub mod summary;
