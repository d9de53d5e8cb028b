//! Command line orchestration of curation runs: configuration, per-stage
//! subcommands, run manifests and resumable artifacts.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod export;
pub mod manifest;
pub mod pipeline;

pub use commands::{execute, exit_code, Cli, Command};
pub use config::Config;
pub use manifest::{RunManifest, StageRecord, StageStatus};
pub use pipeline::{Pipeline, RunOptions, System};
