//! Scenario-driven batch runs of the `minkowski-core` verifiers.

pub mod commands;
pub mod config;
pub mod error;
pub mod expr;

pub use commands::{cmd_curvatures, cmd_dualcheck, cmd_verify, Outcome, Overrides};
pub use config::Scenario;
pub use error::CliError;
