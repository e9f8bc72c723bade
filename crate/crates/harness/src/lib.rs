//! Scenario harness for the learners in `vgm-core`: configuration files,
//! built-in scenarios, seeded multi-trial runs and report files.

pub mod braces;
pub mod config;
pub mod instance;
pub mod lowerbound;
pub mod outputs;
pub mod runner;
pub mod scenarios;
pub mod synthetic;

pub use config::{ConfigError, ScenarioConfig};
pub use runner::{run_scenario, RunOptions, ScenarioResult, Summary, TrialOutcome, TrialReport};
