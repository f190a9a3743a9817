//! Command-line orchestration: configuration parsing, the pipeline commands and their
//! artifacts.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{run, Command, Context, Summary};
pub use config::RunConfig;
pub use error::CliError;

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "LIPSTAB_OUT_DIR";
