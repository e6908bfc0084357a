//! Command-line harness around `tuner-core`: prior generation, kernel
//! selection, tuning campaigns, single-episode simulation and reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;

pub use config::{Config, Method};
pub use error::{CliError, Result};
