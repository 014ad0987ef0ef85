//! Sparse factorisation and eigensolvers shared by the graph and finite
//! element code paths.

pub mod dense;
pub mod eigen;
pub mod factor;

pub use eigen::{lowest_pairs, EigenOptions, EigenPairs};
