//! Scenario-driven front end: parse a scenario file, run the requested
//! stages and write the report and CSV outputs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod report;
pub mod run;
pub mod scenario;

pub use error::CliError;
pub use report::{AnalysisReport, Command};
pub use run::{run_batch, run_scenario, run_scenario_file, RunOptions, RunOutput};
pub use scenario::{load_scenario, parse_scenario, Scenario};
