//! Document information extraction experiment harness.
//!
//! Builds on [`docex_core`] with dataset files, the scorer wire protocol and
//! its transports, the evaluation pipeline, experiment grids and reports.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod pipeline;
pub mod protocol;
pub mod report;
pub mod scorer;
pub mod serve;
pub mod squad;
pub mod training;

pub use docex_core as core;
pub use error::{Error, Result};
