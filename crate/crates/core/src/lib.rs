//! Progressive in-network independent component analysis.
//!
//! A chain of forwarding nodes each refines a shared separation matrix on a
//! growing, column-sampled subset of the mixed data; the final server
//! finishes on the full data and reconstructs the sources.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod ica;
pub mod linalg;
pub mod metrics;
pub mod netsim;
pub mod pica;
pub mod signal;

pub use error::{Error, Result};
