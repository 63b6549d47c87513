//! Configuration files, output formats and the subcommands of the
//! `gradflow` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{cmd_compare, cmd_convergence, cmd_run, cmd_validate, RunArgs};
pub use config::{load, RunConfig, Setup};
pub use error::{CliError, CliResult};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "GRADFLOW_THREADS";
