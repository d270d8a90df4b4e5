//! Experiment runner around `abplab-core`: TOML configs, report files,
//! run manifests and the acceptance suite.

pub mod acceptance;
pub mod config;
pub mod error;
pub mod experiments;
pub mod report;

pub use error::{RunError, RunResult};
