//! Command-line frontend for tick-level liquidity provisioning.
//!
//! Wraps the solver and estimation library with file-based ingestion (JSON
//! market conditions, CSV swap events and liquidity snapshots), five
//! subcommands (`waterfill`, `optimize`, `sweep`, `backtest`, `estimate`),
//! and plot-ready CSV emission. See the crate README for the file schemas.

pub mod commands;
pub mod error;
pub mod formats;
pub mod scenario;

pub use error::CliError;
