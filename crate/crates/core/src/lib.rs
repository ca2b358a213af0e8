#![cfg_attr(not(feature = "std"), no_std)]
// Validation guards use negated comparisons (`!(w >= 0.0)`) so NaN inputs
// fail them too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

//! Coordinated weighted sampling over vector-weighted data.
//!
//! A data set is a set of keys, each carrying one nonnegative weight per
//! *assignment* (a time period, a location, a numeric attribute column).
//! This crate builds Poisson, bottom-k, and k-mins sketches per assignment
//! from a single family of weight-parameterized rank distributions, with the
//! per-assignment samples either independent or *coordinated* (shared-seed or
//! independent-differences consistent ranks), and derives unbiased
//! adjusted-weight estimators for subpopulation aggregates over one or many
//! assignments: sums, max, min, ℓ-th largest, and the L1 difference.
//!
//! The crate is `no_std`-compatible (requires `alloc`); all transcendentals
//! go through `libm`, so rank values and estimates are bit-reproducible
//! across platforms. IO, file formats, the CLI, and the Monte-Carlo
//! evaluation harness live in the companion `coordsketch` crate.

extern crate alloc;

pub mod error;
pub mod estimate;
pub mod hash;
pub(crate) mod math;
pub mod model;
pub mod rank;
pub mod sketch;

pub use error::Error;
pub use estimate::AdjustedWeights;
pub use model::{AggKind, AggregateSpec, ColocatedDataset, DispersedDataset, KeyId, Predicate};
pub use rank::{CoordMode, RankFamily, RankSpec, SeedSource, SeedTable};
pub use sketch::{BottomKSketch, DataModel, KMinsSketch, PoissonSketch, Summary};
