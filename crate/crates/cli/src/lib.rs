//! Command-line front end: problem files in, trajectories and reports out.
//!
//! Exit codes are 0 on success, 1 on bad input and 2 when a solve does not
//! converge or a check fails.

pub mod commands;
pub mod error;
pub mod problem_file;
pub mod traj_csv;

pub use commands::{run, Cli};
pub use error::CliError;
