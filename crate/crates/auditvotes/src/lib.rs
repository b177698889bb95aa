//! Certified robustness for graph node classifiers.
//!
//! The crate builds a smoothed node classifier out of three pieces:
//! a randomization source (sparse edge flips, hash partitioning, or
//! Gaussian vector noise), a graph-rewiring augmenter that de-noises
//! each random sample before classification, and a conditional voting
//! stage that only counts votes passing a filter (e.g. prediction
//! confidence). The certification machinery turns Monte Carlo vote
//! tallies into robustness certificates over (r_a, r_d) edge budgets
//! via constant-likelihood-ratio regions and a worst-case-margin
//! linear program, with brute-force oracles validating every
//! certificate path.

pub mod augment;
pub mod certify;
pub mod classify;
pub mod error;
pub mod graph;
pub mod pipeline;
pub mod rng;
pub mod smoothing;
pub mod voting;

pub use error::{Error, Result};
