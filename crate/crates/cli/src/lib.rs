//! Command-line front end for the asynchronous SGD simulator: config
//! parsing, experiment orchestration and report emission.

pub mod commands;
pub mod config;
pub mod error;

pub use error::{CliError, Result};
