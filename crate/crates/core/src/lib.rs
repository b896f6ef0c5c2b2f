//! Facility-based systems, congestion games and myopic best-response dynamics.
//!
//! A facility-based system is a set of players picking subsets of shared
//! facilities, scored by a global criterion `P` to be minimized. This crate
//! decides whether `P` can be realized as the potential of a congestion game
//! by choosing per-facility cost functions, solves for those costs (fully,
//! partially, on a restricted profile set, or in the least-squares sense),
//! and runs best-response dynamics on the resulting game.
//!
//! Indices are 0-based throughout this API. Text formats built on top of it
//! use 1-based indices.

pub mod congestion;
pub mod design;
pub mod dynamics;
mod error;
pub mod linalg;
pub mod model;

pub use congestion::{CostMatrix, PayoffTable, PerfTable};
pub use error::{Error, Result};
pub use model::{FbsModel, LoadVector, Profile};

/// Default tolerance used by the solvers and consistency checks.
pub const DEFAULT_TOL: f64 = 1e-9;
