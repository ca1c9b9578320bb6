//! Command-line surface of the eqvi solvers: configuration loading,
//! subcommands and report writers.

pub mod commands;
pub mod config;
pub mod output;
