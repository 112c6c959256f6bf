//! Scenario files and runner behind the `solve` binary.

pub mod fields;
pub mod run;
pub mod scenario;

pub use run::{run_scenario, RunError};
pub use scenario::{Mode, Scenario, ValidationError};
