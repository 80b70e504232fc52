//! Command-line surface of the heritability toolkit: CSV file formats,
//! configuration, the simulation benchmark and its reports.

pub mod bench;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod methods;
pub mod report;

pub use error::{CliError, Result};
