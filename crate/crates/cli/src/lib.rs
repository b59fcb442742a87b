//! Command-line front end for the `imave` estimators: config parsing,
//! dataset files and the `fit`, `generate`, `replicate` and `select-dim`
//! subcommands.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;

pub use commands::{run, Outputs};
pub use config::{Command, RunConfig};
pub use error::{CliError, CliResult};
