//! Exact finite-MDP laboratory for generalized n-step lower-bound Q-learning.
//!
//! The crate is organised bottom-up:
//!
//! - [`mdp`]: tabular MDPs, policies, Q/V tables and the dynamic-programming
//!   oracles for `Q^π` and `Q^{π*}`.
//! - [`maxent`]: entropy-regularised evaluation, soft value iteration and the
//!   Boltzmann policy map.
//! - [`operators`]: Bellman, optimality, uncorrected n-step and thresholded
//!   self-imitation operators, their convex combination, fixed points and
//!   contraction-rate estimates.
//! - [`bounds`]: exact n-step lower bounds on optimal Q and V functions and
//!   the batch verification suite.
//! - [`agents`]: delayed-reward chain environments, prioritized replay and
//!   tabular Q / actor-critic learners with self-imitation updates.
//! - [`diagnostics`]: fixed-point bias, sampled-backup variance and the
//!   bias/contraction trade-off reports.

// Negated float comparisons are how validation rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod bounds;
pub mod diagnostics;
pub mod error;
pub mod maxent;
pub mod mdp;
pub mod operators;
pub mod report;
pub mod seeding;

pub use error::{Error, Result};
pub use mdp::{FiniteMdp, Policy, QTable, VTable};
pub use operators::OperatorSpec;
