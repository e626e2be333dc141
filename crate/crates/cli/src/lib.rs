//! Command-line front end and file formats for `sunprobit-core`: CSV
//! ingestion, JSON reports, draws files and the sampler benchmark.

pub mod bench;
pub mod config;
pub mod data;
pub mod report;
pub mod run;
pub mod synth;

pub use config::{Cli, RunConfig};
pub use run::{run, RunError};
