//! Exactly-verifiable Stone duality constructions at desk scale.
//!
//! The library models Stone spaces as spaces of infinite paths through
//! finite tagged binary trees and provides four interlocking toolkits:
//!
//! * [`tree`] / [`clopen`] — tagged shape trees, their clopen sets as
//!   canonical antichains, and the dual finite Boolean algebra;
//! * [`schedule`] / [`metric`] — stagewise approximations of a co-c.e.
//!   pruned tree and the induced upper-approximated (right-c.e.)
//!   ultrametric presentation with point merging and cover enumeration;
//! * [`extract`] — recovery of the dual Boolean algebra from a metric
//!   presentation via certified clopen pairs and a formal term algebra;
//! * [`categoricity`] — splitting trees, tree encodings and effective
//!   homeomorphisms between presentations of the same space;
//! * [`banach`] — the lattice of locally constant rational functions as
//!   a dense subset of C(X;R), indicator calculus, 2-partitions,
//!   partitions of unity, and the stagewise algebra reconstruction.
//!
//! Everything is exact: distances are dyadic rationals, function values
//! are rationals, and every construction can be checked against a
//! brute-force oracle on the underlying finite trees.

pub mod banach;
pub mod categoricity;
pub mod clopen;
pub mod dyadic;
pub mod error;
pub mod extract;
pub mod metric;
pub mod schedule;
pub mod tree;

pub use dyadic::{Dyadic, Q};
pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
