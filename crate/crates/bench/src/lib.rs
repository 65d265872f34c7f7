//! Benchmark harness: configuration, staged pipeline, summaries and report
//! files for hierarchical load forecasting experiments.

pub mod config;
pub mod data;
pub mod manifest;
pub mod pipeline;
pub mod report;
pub mod summary;

pub use config::{BenchmarkConfig, ConfigError};
pub use manifest::RunManifest;
pub use pipeline::{render_report, run_benchmark, RunOutcome, Stage};
pub use summary::SummaryReport;
