//! A two-state, two-action analytic program with risk-sensitive preferences
//! and a deliberately non-monotone plan factorization.
//!
//! In state `x` (valued 1 or 2), action `a` yields reward `x - a`;
//! action 0 moves to state 1 and action 1 moves to state 2, deterministically.
//! The aggregator is `H(x, a, v) = x - a - (beta/gamma) log E exp(-gamma v)`,
//! which collapses to the affine form `x - a + beta v(x'(a))` because the
//! transition is deterministic.
//!
//! The factorization puts `g` on the action set:
//! `W0 v (a) = exp(-gamma v(x'(a)))` and
//! `W1 g (x, a) = x - a - (beta/gamma) log g(a)`.
//! Neither map is monotone, and that is the point of the model: for
//! `beta < 1` the value function is a Bellman fixed point while the
//! refactored value function is not a fixed point of `S` (and differs from
//! `W0 v*`); for `beta > 1` the situation reverses.
//!
//! All sigma-value functions have closed forms, so the model is usable at any
//! positive discount factor without iterating.

use std::sync::Arc;

use crate::dp::{DynamicProgram, PlanFactorization};
use crate::error::{DpError, Result};
use crate::space::StateActionSpace;
use crate::tables::{HFn, Policy, RefactoredFn, ValueFn};

/// Next state index reached by an action (0 -> state 1, 1 -> state 2).
#[inline]
fn next_state(action: usize) -> usize {
    action
}

#[derive(Debug)]
pub struct CounterexampleModel {
    space: StateActionSpace,
    pub beta: f64,
    pub gamma: f64,
}

/// Builds the model. The discount factor may exceed one (the model is
/// analytic), but 0.5 and 1 are rejected: at 1 nothing is defined, and at 0.5
/// the two branches inside `S g*` coincide, degenerating the regime split the
/// model exists to exhibit.
pub fn build_counterexample(beta: f64, gamma: f64) -> Result<CounterexampleModel> {
    if beta <= 0.0 || beta == 0.5 || beta == 1.0 {
        return Err(DpError::Parameter(format!(
            "counterexample requires beta > 0 with beta not in {{0.5, 1}}; got {beta}"
        )));
    }
    if gamma <= 0.0 {
        return Err(DpError::Parameter(format!(
            "counterexample requires gamma > 0; got {gamma}"
        )));
    }
    Ok(CounterexampleModel {
        space: StateActionSpace::dense(2, 2),
        beta,
        gamma,
    })
}

impl CounterexampleModel {
    /// The four feasible policies, in the fixed enumeration
    /// `sigma_1 = (0,0)`, `sigma_2 = (0,1)`, `sigma_3 = (1,1)`,
    /// `sigma_4 = (1,0)`.
    pub fn policies(&self) -> [Policy; 4] {
        [
            Policy(vec![0, 0]),
            Policy(vec![0, 1]),
            Policy(vec![1, 1]),
            Policy(vec![1, 0]),
        ]
    }

    /// Closed-form sigma-value function for policy index `i` in 0..4.
    pub fn v_sigma(&self, i: usize) -> ValueFn {
        let b = self.beta;
        let v = match i {
            0 => [1.0 / (1.0 - b), (2.0 - b) / (1.0 - b)],
            1 => [1.0 / (1.0 - b), 1.0 / (1.0 - b)],
            2 => [b / (1.0 - b), 1.0 / (1.0 - b)],
            3 => [2.0 * b / (1.0 - b * b), 2.0 / (1.0 - b * b)],
            _ => panic!("policy index out of range"),
        };
        ValueFn(v.to_vec())
    }

    /// Closed-form refactored sigma-value function, `g_sigma = W0 v_sigma`.
    pub fn g_sigma(&self, i: usize) -> RefactoredFn {
        let v = self.v_sigma(i);
        RefactoredFn(vec![
            (-self.gamma * v.0[next_state(0)]).exp(),
            (-self.gamma * v.0[next_state(1)]).exp(),
        ])
    }

    /// The value function `v* = sup_sigma v_sigma` (closed form; equals
    /// `v_sigma_1` in both discount regimes).
    pub fn v_star(&self) -> ValueFn {
        let b = self.beta;
        ValueFn(vec![1.0 / (1.0 - b), (2.0 - b) / (1.0 - b)])
    }

    /// The refactored value function `g*(a) = sup_sigma g_sigma(a)`
    /// (closed form; attained by `sigma_3`).
    pub fn g_star(&self) -> RefactoredFn {
        let b = self.beta;
        let gm = self.gamma;
        RefactoredFn(vec![
            (-gm * b / (1.0 - b)).exp(),
            (-gm / (1.0 - b)).exp(),
        ])
    }

    /// The rotated value function `g_hat = W0 v*`.
    pub fn g_hat(&self) -> RefactoredFn {
        let v = self.v_star();
        RefactoredFn(vec![
            (-self.gamma * v.0[0]).exp(),
            (-self.gamma * v.0[1]).exp(),
        ])
    }

    /// The non-monotone plan factorization carried by the model.
    pub fn factorization(self: &Arc<Self>) -> CounterexampleFactorization {
        CounterexampleFactorization { model: self.clone() }
    }
}

impl DynamicProgram for CounterexampleModel {
    fn space(&self) -> &StateActionSpace {
        &self.space
    }

    fn aggregator(&self, x: usize, a: usize, v: &[f64]) -> f64 {
        // The conditional expectation is over a single deterministic next
        // state, so the log-exp pair cancels exactly.
        let x_val = (x + 1) as f64;
        x_val - a as f64 + self.beta * v[next_state(a)]
    }

    fn discount(&self) -> f64 {
        self.beta
    }

    fn is_analytic(&self) -> bool {
        true
    }
}

/// The non-monotone factorization: reduced functions live on the action set.
pub struct CounterexampleFactorization {
    model: Arc<CounterexampleModel>,
}

impl PlanFactorization for CounterexampleFactorization {
    fn reduced_len(&self) -> usize {
        2
    }

    fn is_monotone(&self) -> bool {
        false
    }

    fn w0(&self, v: &[f64], out: &mut [f64]) {
        for (a, o) in out.iter_mut().enumerate() {
            *o = (-self.model.gamma * v[next_state(a)]).exp();
        }
    }

    fn w1(&self, g: &[f64], out: &mut HFn) {
        let (b, gm) = (self.model.beta, self.model.gamma);
        for (pair, x, a) in self.model.space.pairs() {
            let x_val = (x + 1) as f64;
            out.values[pair] = x_val - a as f64 - (b / gm) * g[a].ln();
        }
    }
}
