//! File formats, the template database directory, the reconstruction pipeline
//! and the `ffd` command line, on top of `ffd-core`.

pub mod cli;
pub mod config;
pub mod db;
pub mod error;
pub mod formats;
pub mod numfmt;
pub mod pipeline;

pub use error::{CliError, CliResult};
