//! File formats, dataset trees, experiment runs and the `dain` command line
//! on top of `dain-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod parallel;
pub mod run;
pub mod tree;

pub use error::{Error, Result};
