//! Std companion to `srkrp-core`: an in-process master-worker runtime,
//! matrix files, parallel campaigns and the experiment runner behind the
//! `srkrp` binary.

pub mod campaign;
pub mod config;
mod error;
pub mod io;
pub mod presets;
pub mod runner;
pub mod runtime;

pub use error::{Error, Result};
pub use srkrp_core as core_api;
