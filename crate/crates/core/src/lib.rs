//! Geometry-aware stochastic optimization.
//!
//! This crate holds the numerical core: norms and distance-generating
//! functions ([`geometry`]), single-block mirror updates including the
//! exponentiated-gradient step ([`mirror`]), the block-stochastic mirror
//! descent driver ([`blockmd`]), Bregman proximal stationarity
//! ([`stationarity`]), benchmark objectives ([`problems`]) and a small
//! weight-sharing supernet searched with exponentiated gradient
//! ([`supernet`]).
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and the
//! experiment harness live in the `gaea` crate.

#![no_std]
#![deny(rust_2018_idioms)]
// `!(x > 0.0)` deliberately rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod arch;
pub mod blockmd;
pub mod error;
pub mod geometry;
pub mod mirror;
pub mod numerics;
pub mod problems;
pub mod record;
pub mod stationarity;
pub mod supernet;

pub use arch::{ArchParams, Chart};
pub use error::{Error, Result};
pub use geometry::{BlockGeometry, Dgf, Domain, NormKind, ProductGeometry};
pub use numerics::{StreamRng, StreamTag};
pub use problems::Objective;
pub use record::RunRecord;
