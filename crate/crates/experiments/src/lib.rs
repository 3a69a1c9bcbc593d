//! Seeded experiment sweeps, result comparison and the property suite behind
//! the `irs-wpcn` command line tool.

pub mod compare;
pub mod error;
pub mod props;
pub mod spec;
pub mod sweep;

pub use error::{ExperimentError, Result};
