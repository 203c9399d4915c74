//! Discrete facility location under demand and travel-time uncertainty with
//! equity objectives.
//!
//! The crate bundles:
//!
//! * [`instance`] — location instances (nodes, travel-time matrices, demand)
//!   with CSV ingestion and the Lehigh County dataset built in;
//! * [`metrics`] — the inequity-index family (MAD, SAD, range, min/max
//!   ratio, variance, Gini) plus the Pigou-Dalton transfer check;
//! * [`models`] — the objective catalog: p-median, p-center, total distance,
//!   eight equity objectives, lexicographic center, and ordered medians;
//! * [`linear`] — symbolic linearized counterparts used by the equivalence
//!   test suite;
//! * [`scenarios`] — seeded scenario generation (Set 1, Set 2, custom) and
//!   sample-average objectives with common random numbers;
//! * [`solver`] — exact enumeration with branch-and-bound inner assignment,
//!   lexicographic minimax, and swap local search;
//! * [`experiment`] — the reproducible study harness behind the `equiloc`
//!   CLI: result tables, equity diagnostics, divergence summaries, and a
//!   verification pass that re-derives every reported objective.

pub mod experiment;
pub mod instance;
pub mod linear;
pub mod metrics;
pub mod models;
mod rng;
pub mod scenarios;
pub mod solver;
