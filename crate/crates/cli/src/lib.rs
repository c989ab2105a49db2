//! Experiment runner for the linear Skorohod equations of `fbm-chaos-core`.
//!
//! Each experiment writes `report.json` and one CSV file per table into an
//! output directory.

pub mod config;
pub mod experiments;
pub mod montecarlo;
pub mod report;

pub use config::Settings;
pub use experiments::Experiment;
pub use report::ExperimentReport;
