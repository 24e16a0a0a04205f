//! Command-line front end for `heatctl-core`: configuration, CSV formats,
//! reports, self-checks and parameter sweeps.

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod plot;
pub mod report;
pub mod sweep;
pub mod verify;

pub use error::{CliError, CliResult};
