//! Solvers and analysis for structured hierarchical games.

// `!(a < b)` is used deliberately so that NaN fails every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod brd;
pub mod dbi;
pub mod diff;
pub mod error;
pub mod fields;
pub mod games;
pub mod linalg;
pub mod oracle;
pub mod profile;
pub mod rng;
pub mod trace;
pub mod tree;

pub use error::{Result, ShgError};
pub use oracle::UtilityOracle;
pub use profile::{project, ActionProfile};
pub use trace::{Init, SolverConfig, StopReason, Trace, TraceEntry};
pub use tree::{build_tree, GameTree, Interval, PlayerBounds, PlayerId};
