//! Configuration, orchestration and file output for the command-line tool.

pub mod config;
pub mod io;
pub mod printed;
pub mod pipeline;
pub mod report;
pub mod reproduce;

pub use config::{ConfigError, ControllerKind, ExperimentConfig, GainsSource, ModelSource};
pub use report::{RunReport, ScenarioReport};
pub use reproduce::{reproduce_tables, ReproduceOutput};
