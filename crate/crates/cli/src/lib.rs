//! Command-line pipeline for the modkit toolkit: spec files and the design
//! wizard, dataset/training/evaluation subcommands and report bundles.

pub mod commands;
pub mod error;
pub mod output;
pub mod report;
pub mod spec;
pub mod wizard;

pub use commands::{run, Cli};
pub use error::{CliError, CliResult, ErrorKind};
