//! Library side of the `adaclust` command: run configuration, parallel
//! restarts with deterministic selection, and the subcommand bodies.

pub mod commands;
mod error;
mod run;

pub use error::CliError;
pub use run::{cluster_sizes, fit_once, fit_restarts, Algo, Candidate, RestartOutcome, RunConfig, Selection};
