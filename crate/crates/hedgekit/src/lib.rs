//! Standard-library side of hedgekit: JSON instance files, CSV iteration
//! logs and run summaries, a rayon scenario executor, and the experiment
//! harness behind the `hedgekit` binary.
//!
//! The numerics live in [`hedgekit_core`], re-exported here as [`core`].

pub use hedgekit_core as core;

pub mod audit;
pub mod exec;
pub mod harness;
pub mod instance;
pub mod logs;
pub mod summary;

mod error;

pub use error::{Error, Result};
