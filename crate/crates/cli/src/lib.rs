//! Scenario harness for the NV magnetometry simulator.
//!
//! The library side of the `nvsim` binary: scenario files ([`config`]),
//! the shot-noise readout model ([`camera`]), the named experiment
//! registry ([`experiments`]), and artifact writers ([`export`]). The
//! binary is a thin shell over [`experiments::run_scenario`] +
//! [`export::export`]; tests drive the same entry points in-process.
//!
//! Every pipeline is deterministic in (config, seed): scenario in,
//! byte-identical CSV/graymap/report artifacts out.

pub mod camera;
pub mod config;
pub mod error;
pub mod experiments;
pub mod export;

pub use error::{CliError, Result};
