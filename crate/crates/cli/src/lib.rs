//! Command-line front end: argument parsing, per-task commands and report files.

pub mod args;
pub mod commands;
pub mod error;
pub mod report;

pub use args::Cli;
pub use commands::run;
pub use error::{CliError, CliResult};
