//! Central limit theory for weakly dependent lattice fields summed over
//! irregular index sets: exact set correlograms, field simulation, the
//! big-block/small-block decomposition and Monte Carlo verification of the
//! Gaussian limit `N(0, Σ_k γ(k) H(k; A))`.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::redundant_guards)]

pub mod blocks;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod harness;
pub mod numeric;
pub mod partial_sums;
pub mod rng;

pub use error::{Error, Result};
pub use geometry::{IndexSetSpec, Point, Window};
