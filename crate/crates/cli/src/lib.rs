//! Subcommand implementations behind the `tctn` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod pgm;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
