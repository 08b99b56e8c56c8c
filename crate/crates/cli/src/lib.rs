//! Scenario runner for the `contactforge` command line.

pub mod builtin;
pub mod error;
pub mod output;
pub mod runner;
pub mod scenario;
pub mod task;

pub use error::{CliError, CliResult};
pub use runner::{run, Run, RunOptions};
pub use scenario::{load_scenario, parse_scenario, Scenario, Tolerances};
pub use task::Command;
