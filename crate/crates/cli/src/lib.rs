//! Configuration-driven experiments over the `ambiscatter` pipeline.

pub mod config;
pub mod experiment;
pub mod presets;

pub use config::{validate_config, ExperimentConfig, FieldError, Normalized};
pub use experiment::{run_classification, run_experiment, RunError, Stage};
