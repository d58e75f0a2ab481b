//! Configuration, experiment commands, and artifact writers for chunkgen runs.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod ppm;
pub mod report;

pub use config::RunConfig;
pub use error::{HarnessError, Result};
