//! IO, configuration and experiment orchestration for `mhp-core`.
//!
//! The `mhp` binary is a thin layer over these modules; the acceptance
//! suite drives them directly.

pub mod budget;
pub mod config;
pub mod io;
pub mod runner;
pub mod seeds;
pub mod tables;
