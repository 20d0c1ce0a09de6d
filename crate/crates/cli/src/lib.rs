//! Experiment harness around `lcc-core`: CSV ingestion, a synthetic data
//! generator, stratified splits, TOML configuration, the end-to-end pipeline
//! and the statistics report.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod ingest;
pub mod pipeline;
pub mod report;
pub mod split;
pub mod synthetic;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use pipeline::{run_pipeline, ExperimentReport};
pub use synthetic::{generate_synthetic, SyntheticSpec};
