//! Joint phase-shift and resource optimisation for IRS-aided wireless
//! powered communication networks.

pub mod allocation;
pub mod channel;
pub mod error;
pub mod kernel;
pub mod plan;
pub mod sca;
pub mod scenario;
pub mod sdr;
pub mod surrogates;

pub use error::{Error, Result};
