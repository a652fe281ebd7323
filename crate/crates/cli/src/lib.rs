//! Pipeline driver behind the `twinbeam` binary: configuration, subcommands
//! and report files.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
