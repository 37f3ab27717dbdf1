//! Command-line harness: pinned experiment configs driving the
//! verification suites, bound curves and region enumeration.

pub mod config;
pub mod harness;

pub use config::{Command, ExperimentConfig, Mode};
pub use harness::{run, HarnessError, Outcome};
