//! Experiment harness, file formats, reports and CLI for `gfront-core`.

pub mod config;
pub mod experiments;
pub mod records;
pub mod formats;
pub mod harness;
pub mod report;
