//! Simulation laboratory for the log-gamma directed polymer.
//!
//! This crate drives the exact machinery in `polymer-core` at scale: each
//! experiment runs replicated environments under deterministic per-replica
//! random streams, reduces the results into check rows with declared
//! acceptance bands, and emits a versioned JSON report plus optional
//! plot-ready CSV. The `polymer` binary is the command-line front door.

pub mod config;
pub mod dump;
pub mod experiments;
pub mod parallel;
pub mod report;
pub mod selftest;

/// Errors surfaced by the laboratory layer.
#[derive(Debug, thiserror::Error)]
pub enum LabError {
    /// Invalid or contradictory configuration; the CLI exits with code 2.
    #[error("configuration error: {0}")]
    Config(String),
    /// Filesystem failure while reading or writing artifacts.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    /// A core computation rejected its inputs or lost precision.
    #[error("computation error: {0}")]
    Core(#[from] polymer_core::Error),
    /// A dump file was malformed.
    #[error("format error: {0}")]
    Format(String),
}
