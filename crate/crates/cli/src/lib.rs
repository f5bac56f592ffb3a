//! Experiment harness for the `ncergo` binary: JSON configs, fixtures, experiment
//! runners, file output and the built-in acceptance suite.

pub mod acceptance;
pub mod canonical;
pub mod config;
pub mod emit;
pub mod error;
pub mod fixture;
pub mod oracles;
pub mod runner;

pub use config::{ExperimentConfig, Format, Selector};
pub use error::CliError;
pub use runner::{run, RunReport};
