//! Configuration parsing, experiment orchestration and report output.

pub mod config;
pub mod run;

pub use config::{load_config, parse_config, ExperimentConfig, ExperimentKind, Overrides};
pub use run::{run, solve_once, write_outputs, RunReport};
