//! Command line front end for the `mdingarch` library.
pub mod acceptance;
pub mod commands;
pub mod csv;
mod error;
pub mod json;

pub use commands::{run, run_args, Cli, Output};
pub use error::CliError;
