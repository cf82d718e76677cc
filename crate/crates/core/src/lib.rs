//! Hybrid locomotion templates: vertical hopping, fore-aft stepping, SLIP,
//! clocked attitude control and a tailed monoped, with return-map analysis.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod hir;
pub mod hybrid;
pub mod monoped;
pub mod slip;
pub mod svg;
pub mod sweep;
pub mod templates;
pub mod verify;

pub use error::{Error, Result};
