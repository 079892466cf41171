//! Collective categorical label inference on attributed graphs, with
//! Monte-Carlo estimation of aggregate network properties.
//!
//! The engine has five layers:
//!
//! - [`data`]: attributed-graph loading, dense re-indexing, observation splits.
//! - [`prior`]: local label priors from multinomial logistic regression.
//! - [`psl`]: hinge-loss rule templates, grounding over a graph, the convex
//!   MAP solver, and weight learning.
//! - [`sampler`]: blocked Metropolis-within-Gibbs sampling of the joint label
//!   distribution, with bound-driven block construction.
//! - [`aggregates`]: network queries Q1-Q5, discretization, expectation over a
//!   sample set, and estimate/report evaluation.
//!
//! [`synth`] generates seeded benchmark datasets used by the test suite and
//! usable as CLI inputs.

pub mod aggregates;
pub mod data;
pub mod prior;
pub mod psl;
pub mod sampler;
pub mod synth;
