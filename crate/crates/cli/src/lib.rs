// Validation guards use negated comparisons (`!(u > 0.0)`) so NaN inputs
// fail them too; index-based loops mirror the per-assignment layout.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

//! Companion crate for `coordsketch-core`: CSV/JSON file formats, the
//! `coordsketch` command-line tool, and the Monte-Carlo evaluation harness
//! (SV/nSV reports, variance-ratio tables, sharing-index curves, and an
//! exact seed-grid oracle for tiny instances).

pub mod error;
pub mod harness;
pub mod io;
pub mod oracle;
pub mod parse;
pub mod synth;

pub use error::Error;
