//! Command-line front end: configuration, suite orchestration and reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

pub use commands::{run, RunOutcome};
pub use config::{CommandKind, RunConfig};
pub use error::CliError;
