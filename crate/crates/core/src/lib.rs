//! Plan-factorized dynamic programming.
//!
//! A dynamic program is described abstractly by a state-action aggregator
//! `H(x, a, v)`; the Bellman operator maximizes it over the feasible set. A
//! plan factorization splits `H` into a pair `(W0, W1)` with
//! `W1 W0 v = H(.,., v)`, which rotates the Bellman operator
//! `T = M W1 W0` on the state space into the refactored operator
//! `S = W0 M W1` on a (typically much smaller) reduced domain. Iterating `S`
//! converges at the same rate as iterating `T` while each sweep costs a
//! fraction as much, which is where the large wall-clock ratios measured by
//! the [`bench`] module come from.
//!
//! Crate layout:
//! - [`operators`]: the operator algebra (`M`, `M_sigma`, `T`, `S`,
//!   `T_sigma`, `S_sigma`, greedy extraction, lift/lower).
//! - [`solvers`]: value function iteration, refactored value function
//!   iteration, optimistic policy iteration in both forms, policy
//!   evaluation, a brute-force optimality oracle and an empirical
//!   contraction-modulus probe.
//! - [`models`]: concrete programs (finite MDP, consumer bankruptcy, optimal
//!   stopping, risk-sensitive control, robust control, and an analytic
//!   two-state program with a non-monotone factorization).
//! - [`numerics`]: AR(1) discretization, grids, interpolation, and the Monte
//!   Carlo fitted operators for continuous-state stopping problems.
//! - [`bench`]: wall-clock comparison and scaling-exponent harness.

pub mod bench;
pub mod dp;
pub mod error;
pub mod models;
pub mod numerics;
pub mod operators;
pub mod solvers;
pub mod space;
pub mod tables;

pub use dp::{DynamicProgram, PlanFactorization};
pub use error::{DpError, Result};
pub use space::{IndexProduct, StateActionSpace};
pub use tables::{sup_norm, sup_norm_diff, HFn, Policy, RefactoredFn, ValueFn};
