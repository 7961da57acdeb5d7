//! Exact uniform random number generation from finite-memory sources.
//!
//! A sequence emitted by an unknown Markov source of order `k` carries
//! randomness that can be converted into *perfectly* uniform integers by
//! enumerating its Markov type class: all sequences sharing the transition
//! counts of the observed one are exactly equiprobable, whatever the source
//! parameters are. This crate implements that program end to end:
//!
//! - [`model`]: finite-memory source descriptions, exact sequence
//!   probabilities, stationary quantities, and seeded sampling;
//! - [`types`]: type classes — counting (Whittle's formula), enumeration,
//!   ranking/unranking, and prefix-class ("one symbol peeled") calculus;
//! - [`fvr`]: fixed-to-variable generators mapping an input block to a
//!   uniform integer whose range lives in a configurable target set;
//! - [`twice_universal`]: order-agnostic variants that first estimate the
//!   source order with a penalized empirical-entropy rule;
//! - [`vfr`]: variable-to-fixed generators consuming a stream until they can
//!   emit one uniform draw from a fixed range `0..M`.
//!
//! All counting is exact (`num_bigint::BigUint`); uniformity claims are
//! verified in integer or rational arithmetic, never by floating point.

pub mod bigmath;
pub mod error;
pub mod fvr;
pub mod model;
pub mod twice_universal;
pub mod types;
pub mod vfr;

pub use error::{Error, Result};
pub use model::{MarkovParams, ModelSpec, Symbol};
pub use types::{ClassSizeCache, TypeCounts};
