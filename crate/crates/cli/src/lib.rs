//! Command-line front end for `lambda2p`: single points, parameter sweeps,
//! figure panels, oracle cross-checks and amplitude snapshots, written as CSV
//! or JSON.

pub mod args;
pub mod config;
pub mod error;
pub mod jobs;
pub mod table;

pub use args::{execute, Cli, RunConfig};
pub use error::CliError;
