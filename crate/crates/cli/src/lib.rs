//! Command-line pipeline for swap-based level balancing: configuration,
//! file formats and the `swapbal` subcommands.

pub mod app;
pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod parallel;
