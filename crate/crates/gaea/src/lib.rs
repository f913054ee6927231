//! Experiment harness for `gaea-core`: JSON experiment specs, parallel seed
//! sweeps, aggregation, SVG plots, dataset and search-space files, and the
//! acceptance suite behind `gaea verify`.

// `!(x > 0.0)` deliberately rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![deny(rust_2018_idioms)]

pub mod acceptance;
pub mod aggregate;
mod error;
pub mod experiment;
pub mod golden;
pub mod io;
pub mod plot;
pub mod runner;

pub use error::{HarnessError, Result};
