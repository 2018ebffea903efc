//! Batch runner and analysis for the `asyncbo` command-line tool.

pub mod analyze;
pub mod batch;
pub mod spec;
