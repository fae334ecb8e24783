//! Parameter-file front end: loads and validates a network description,
//! then trains, classifies, tunes or inspects it.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use commands::{run, Cli, Command};
pub use config::{Config, Diagnostic, Diagnostics};
pub use error::CliError;
