//! Library side of the `twopoint` command: configuration, commands and reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
