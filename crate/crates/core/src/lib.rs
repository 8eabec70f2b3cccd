//! Hierarchical-label probabilistic classification.
//!
//! Scores from a differentiable scorer define a distribution over the legal
//! configurations of a root → attribute → region label hierarchy. The crate
//! computes that distribution exactly, trains scorers with marginalized
//! likelihood losses (optionally re-weighted by a bi-level outer loop that
//! prioritizes the root task), fits psychometric thresholds, and evaluates
//! detectors under held-out-method and held-out-attribute protocols.

pub mod error;
pub mod eval;
pub mod hierarchy;
pub mod inference;
pub mod bilevel;
pub mod cli;
pub mod io;
pub mod losses;
pub mod model;
pub mod psychometrics;
pub mod rng;
pub mod synthdata;

pub use error::{Error, GraphError, Result};
