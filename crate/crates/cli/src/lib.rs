//! Configuration, presets, orchestration and export for the optoforce
//! simulations.
//!
//! A run resolves a configuration (preset, then file, then `--set`
//! overrides), executes one experiment, and writes CSV tables together with
//! `resolved_config.toml` and a `metadata.json` sidecar holding the resolved
//! configuration, versions, timings and SHA-256 checksums of every file.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod presets;
pub mod quantity;
pub mod run;

pub use config::{load_config, ExperimentConfig, ModelName};
pub use error::{exit, CliError};
pub use run::{execute, RunReport, Subcommand};
