//! Experiment harness for the DPD simulation laboratory: config parsing,
//! deterministic seed derivation, scenario orchestration, and CSV artifact
//! emission. The `dpdlab` binary is a thin CLI over this library.

pub mod artifacts;
pub mod config;
pub mod scenarios;
pub mod seed;
