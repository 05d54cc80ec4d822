//! Library surface of the `ptycho` command-line driver: experiment
//! configuration parsing and the command implementations, kept callable for
//! integration tests.

pub mod commands;
pub mod config;

pub use config::ExperimentConfig;
