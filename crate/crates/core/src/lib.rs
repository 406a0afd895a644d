//! Contract design for hidden-action principal / multi-agent problems.
//!
//! The crate computes optimal deterministic contracts, near-optimal randomized
//! contracts through a capped linear relaxation, single-agent contracts under
//! virtual (scaled) costs, linear and affine contracts with welfare guarantees,
//! and the Bayesian counterparts for finite type sets. Every solver has a
//! brute-force audit next to it so results can be checked independently.
//!
//! Modules:
//!
//! - [`model`]: instances, action profiles, contracts, validation.
//! - [`format`]: the JSON document formats for instances and contracts.
//! - [`lp`]: dense two-phase simplex used by every optimization routine.
//! - [`detsolve`]: deterministic multi-agent and single-agent contracts,
//!   equilibrium and best-response sets.
//! - [`randsolve`]: the linearized randomized-contract program and recovery.
//! - [`reduction`]: payment splitting, linear contracts, welfare analytics.
//! - [`bayes`]: typed agents, the Bayesian relaxation, affine contracts.
//! - [`generators`]: fixture instances and seeded random instances.
//! - [`cli`]: the command-line front end.

pub mod bayes;
pub mod cli;
pub mod detsolve;
pub mod error;
pub mod format;
pub mod generators;
pub mod lp;
pub mod model;
pub mod randsolve;
pub mod reduction;

pub use error::{Error, Result};
pub use model::{
    ActionProfile, DeterministicContract, Instance, ProfileSpace, RandomizedContract, Ratio,
    Value, Violation,
};

/// Tolerance used for incentive constraints and argmax membership.
pub const IC_TOL: f64 = 1e-7;

/// Default feasibility tolerance handed to the LP engine.
pub const FEAS_TOL: f64 = 1e-7;

/// Tolerance for probability vectors summing to one.
pub const PROB_TOL: f64 = 1e-9;
