//! Command-line front end: raster IO, job configuration and commands.

pub mod commands;
pub mod config;
pub mod grid;

pub use commands::{run, Cli};
