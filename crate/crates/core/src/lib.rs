//! Spectral analysis of `(p, q, r)` graph Laplacians on random point clouds
//! and of their weighted elliptic continuum limits.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// index loops mirror the matrix notation
#![allow(clippy::needless_range_loop)]

pub mod continuum;
pub mod density;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod linalg;
pub mod mm;
pub mod rng;
pub mod sparse;
pub mod spectral;

pub use error::{Error, Result};
