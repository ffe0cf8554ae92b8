//! Experiment runner for the samplize estimators: configs, seeded sweeps,
//! CSV output, scaling fits and the command-line interface.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod fit;
pub mod output;
