//! Ensemble experiment driver behind the `pbqaoa` binary.
//!
//! An output directory holds `problems/` and `angles/` (one JSON file per
//! replica), per-size tables `instances_nXX.csv`, `bins_nXX.csv`,
//! `covariance_nXX.csv`, `comparison_nXX.csv`, the ensemble report
//! `summary_nXX.json`, `scaling.json` when at least four sizes completed,
//! and `manifest.json`.

pub mod config;
pub mod output;
pub mod pipeline;
pub mod tables;

pub use config::ExperimentConfig;
pub use output::{write_atomic, Manifest};
pub use pipeline::{analyze_dir, generate, optimize_dir, run_pipeline, EnsembleReport, Layout, RunReport, RunStatus};
