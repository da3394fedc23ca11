//! File formats and commands behind the `freqband` executable.

pub mod config;
pub mod error;
pub mod run;
pub mod table;

pub use error::{CliError, Result};
