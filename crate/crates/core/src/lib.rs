//! Socially-aware privacy incentives for federated learning.
//!
//! Clients pick zCDP privacy budgets in response to a unit reward announced
//! by the server, while their privacy cost also depends on the budgets of
//! clients reachable through a weighted social graph. The crate covers the
//! whole pipeline:
//!
//! * [`graph`]: social graph generation, normalization, multi-hop
//!   propagation coefficients;
//! * [`mechanism`]: noise calibration, costs, utilities and welfare;
//! * [`equilibrium`]: the leader/follower equilibrium via mean-field fixed
//!   point iteration, baselines and price-of-anarchy analysis;
//! * [`flsim`]: a federated training simulator on synthetic least-squares
//!   tasks with clipped, Gaussian-perturbed updates;
//! * [`config`] and [`experiment`]: scenario files, sweeps and CSV output.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod equilibrium;
pub mod error;
pub mod experiment;
pub mod flsim;
pub mod graph;
pub mod mechanism;
pub mod rng;

pub use error::{ConfigError, Error, Result};
