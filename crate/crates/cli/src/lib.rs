//! Config-driven runner for the twisted-tube pipelines.

pub mod config;
pub mod output;
pub mod pipeline;
pub mod sweep;
