//! Config parsing for the `fbsde` command-line runner.

pub mod config;
