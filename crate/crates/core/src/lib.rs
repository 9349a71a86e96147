//! Local graph clustering with approximate personalized PageRank.
//!
//! The crate covers the push approximation over any [`graph::GraphAccess`]
//! backend, exact solvers used as oracles, degree-corrected stochastic block
//! models with their population analytics, degree-adjusted ranking, and the
//! simulation harness that ties them together.

pub mod block_model;
pub mod clustering;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod json;
pub mod ppr;
pub mod rng;

pub use error::{AccessError, Error, Result};
pub use graph::{Graph, GraphAccess, IdMap};
pub use ppr::{approximate_ppr, PprDocument, PprResult, PreferenceVector};
