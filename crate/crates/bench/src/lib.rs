//! Reproduction harness for `slabnop`: JSON case and suite files, dataset
//! and training jobs, and the CSV/report writers behind the `slabnop`
//! command-line tool.

pub mod case;
mod error;
pub mod jobs;
pub mod output;
pub mod paths;
pub mod suite;

pub use error::{BenchError, Result, EXIT_NOT_CONVERGED, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE};
