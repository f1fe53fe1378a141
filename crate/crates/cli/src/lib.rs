//! Scenario runner for the AUV C2 stack.

pub mod dist;
pub mod eventlog;
pub mod runner;
pub mod scenario;
pub mod transcript;

pub use eventlog::{EventLog, Record};
pub use runner::{run_all_in_one, RunOptions, RunOutput, Utterance};
pub use scenario::{load_scenario, parse_scenario, Scenario, ScenarioError};
