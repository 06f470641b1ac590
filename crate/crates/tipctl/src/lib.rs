//! Parameter sweeps, CSV formats and the `tipctl` command line on top of
//! `tipping-core`.
//!
//! Monte-Carlo ensembles are split into fixed path blocks whose integer
//! tallies are merged, so results do not depend on the number of threads.

pub mod cli;
pub mod config;
pub mod error;
pub mod format;
pub mod parallel;
pub mod sweep;

pub use error::{Error, Result};
