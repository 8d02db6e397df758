//! Counting-based multidimensional poverty measurement with positional depth.
//!
//! The engine identifies the poor with the dual-cutoff counting approach
//! (deprivation cutoffs `z_j`, poverty cutoff `k`) and measures the depth of
//! each deprivation from the indicator's weighted empirical CDF, so ordinal
//! indicators get a depth component without any cardinal distance. The
//! aggregate index factors as `P = H * A * S`.
//!
//! Module map:
//!
//! * [`indicator`]: indicator specs, spec-document parsing, dataset encoding.
//! * [`reference`]: weighted empirical CDFs and positional depth scores.
//! * [`identification`]: deprivation matrices, poverty identification, censoring.
//! * [`measures`]: `H`, `A`, `S`, `P`, `P_alpha` and the cardinal gap block.
//! * [`decomposition`]: subgroup decomposition, contributions, dominance curves.
//! * [`concordance`]: rank concordance between positional and normalized gaps.
//! * [`axioms`]: randomized and exhaustive property checks with counterexample search.

// `!(x > 0.0)` style tests are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod axioms;
pub mod concordance;
pub mod decomposition;
mod error;
pub mod identification;
pub mod indicator;
pub mod measures;
mod par;
pub mod reference;
pub mod sum;

pub use error::{Error, Result};
pub use identification::{build_profile, default_k_grid, DeprivationProfile, PovertyCutoff};
pub use indicator::{encode_dataset, parse_spec, Dataset, IndicatorKind, IndicatorSpec, MissingPolicy, SpecDocument, Table};
pub use measures::{MeasureReport, AfBlock};
pub use reference::{ReferenceDistribution, ReferenceMode};
