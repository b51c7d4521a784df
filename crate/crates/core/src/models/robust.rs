//! Robust control with multiplier preferences. The full state is
//! `(s, epsilon)` where `s` is the endogenous component and `epsilon` an
//! i.i.d. shock that doubles as a state coordinate; a control `u` moves the
//! endogenous component deterministically to `s' = f(s, u)` (projected onto
//! the `s` grid at build time). The aggregator is
//!
//! `H(s, eps, u, v) = r(s, eps, u)
//!     - beta theta log E_eps' [ exp(-v(f(s, u), eps') / theta) ]`,
//!
//! so `W0` integrates the shock coordinate out at a fixed endogenous point,
//! `W0 v (s) = -theta log E_eps' exp(-v(s, eps') / theta)`, and
//! `W1 g (s, eps, u) = r(s, eps, u) + beta g(f(s, u))`. The refactored value
//! function acts on the `s` grid alone, dropping the shock coordinate.

use std::sync::Arc;

use crate::dp::{DynamicProgram, PlanFactorization};
use crate::error::{DpError, Result};
use crate::numerics::Grid1D;
use crate::space::StateActionSpace;
use crate::tables::HFn;

#[derive(Debug)]
pub struct RobustControlModel {
    s_grid: Grid1D,
    eps_weights: Vec<f64>,
    n_controls: usize,
    /// `rewards[(is * n_eps + ieps) * n_controls + iu]`.
    rewards: Vec<f64>,
    /// Projection of `f(s, u)` onto the `s` grid: `next_s[is * n_controls + iu]`.
    next_s: Vec<usize>,
    theta: f64,
    beta: f64,
    space: StateActionSpace,
}

impl RobustControlModel {
    /// Builds the model from tabulating closures. `transition(s, u)` returns
    /// the next endogenous state value, which is projected to the nearest
    /// grid point; the projection map is precomputed and recorded.
    pub fn new(
        s_grid: Grid1D,
        eps_grid: Grid1D,
        eps_weights: Vec<f64>,
        u_grid: Grid1D,
        reward: impl Fn(f64, f64, f64) -> f64,
        transition: impl Fn(f64, f64) -> f64,
        theta: f64,
        beta: f64,
    ) -> Result<Self> {
        if !(theta > 0.0) {
            return Err(DpError::Parameter(format!(
                "robustness penalty theta must be positive, got {theta}"
            )));
        }
        if !(0.0..1.0).contains(&beta) {
            return Err(DpError::Parameter(format!(
                "discount factor {beta} outside [0, 1)"
            )));
        }
        let n_eps = eps_grid.len();
        if eps_weights.len() != n_eps {
            return Err(DpError::Dimension(format!(
                "{} shock weights for {} shock points",
                eps_weights.len(),
                n_eps
            )));
        }
        let wsum: f64 = eps_weights.iter().sum();
        if (wsum - 1.0).abs() > 1e-10 || eps_weights.iter().any(|&w| w < 0.0) {
            return Err(DpError::Parameter(format!(
                "shock weights are not a probability vector (sum {wsum})"
            )));
        }
        let (ns, nu) = (s_grid.len(), u_grid.len());
        let mut rewards = Vec::with_capacity(ns * n_eps * nu);
        for is in 0..ns {
            for ie in 0..n_eps {
                for iu in 0..nu {
                    rewards.push(reward(s_grid.at(is), eps_grid.at(ie), u_grid.at(iu)));
                }
            }
        }
        let mut next_s = Vec::with_capacity(ns * nu);
        for is in 0..ns {
            for iu in 0..nu {
                next_s.push(s_grid.nearest_index(transition(s_grid.at(is), u_grid.at(iu))));
            }
        }
        Ok(Self {
            space: StateActionSpace::dense(ns * n_eps, nu),
            s_grid,
            eps_weights,
            n_controls: nu,
            rewards,
            next_s,
            theta,
            beta,
        })
    }

    pub fn n_endogenous(&self) -> usize {
        self.s_grid.len()
    }

    pub fn n_shocks(&self) -> usize {
        self.eps_weights.len()
    }

    /// Recorded grid projection of `f(s, u)`.
    pub fn projected_next(&self, is: usize, iu: usize) -> usize {
        self.next_s[is * self.n_controls + iu]
    }

    /// `-theta log E_eps' exp(-v(s, eps') / theta)` at endogenous index `is`,
    /// evaluated with a max shift for stability.
    fn shock_certainty_equivalent(&self, is: usize, v: &[f64]) -> f64 {
        let n_eps = self.eps_weights.len();
        let slice = &v[is * n_eps..(is + 1) * n_eps];
        let mut m = f64::NEG_INFINITY;
        for (&w, &vx) in self.eps_weights.iter().zip(slice) {
            if w > 0.0 {
                m = m.max(-vx / self.theta);
            }
        }
        let mut s = 0.0;
        for (&w, &vx) in self.eps_weights.iter().zip(slice) {
            if w > 0.0 {
                s += w * (-vx / self.theta - m).exp();
            }
        }
        -self.theta * (m + s.ln())
    }
}

impl DynamicProgram for RobustControlModel {
    fn space(&self) -> &StateActionSpace {
        &self.space
    }

    fn aggregator(&self, x: usize, u: usize, v: &[f64]) -> f64 {
        let n_eps = self.eps_weights.len();
        let is = x / n_eps;
        let s_next = self.next_s[is * self.n_controls + u];
        self.rewards[x * self.n_controls + u]
            + self.beta * self.shock_certainty_equivalent(s_next, v)
    }

    fn discount(&self) -> f64 {
        self.beta
    }
}

/// Reduced domain = the endogenous grid alone.
pub struct RobustFactorization {
    model: Arc<RobustControlModel>,
}

impl PlanFactorization for RobustFactorization {
    fn reduced_len(&self) -> usize {
        self.model.s_grid.len()
    }

    fn is_monotone(&self) -> bool {
        true
    }

    fn w0(&self, v: &[f64], out: &mut [f64]) {
        for (is, o) in out.iter_mut().enumerate() {
            *o = self.model.shock_certainty_equivalent(is, v);
        }
    }

    fn w1(&self, g: &[f64], out: &mut HFn) {
        let m = &self.model;
        let n_eps = m.eps_weights.len();
        for (pair, x, u) in m.space.pairs() {
            let is = x / n_eps;
            let s_next = m.next_s[is * m.n_controls + u];
            out.values[pair] = m.rewards[x * m.n_controls + u] + m.beta * g[s_next];
        }
    }
}

/// Wraps a model with its shock-integrating factorization.
pub fn build_robust(
    model: Arc<RobustControlModel>,
) -> (Arc<RobustControlModel>, RobustFactorization) {
    let pf = RobustFactorization {
        model: model.clone(),
    };
    (model, pf)
}

/// A small smooth tracking instance used by tests: the control is the next
/// endogenous state and the reward penalizes distance from a shock-shifted
/// target.
pub fn tracking_instance(ns: usize, n_eps: usize, theta: f64, beta: f64) -> Result<Arc<RobustControlModel>> {
    let s_grid = Grid1D::equidistant(0.0, 1.0, ns)?;
    let eps_grid = Grid1D::equidistant(-0.5, 0.5, n_eps)?;
    let weights = vec![1.0 / n_eps as f64; n_eps];
    let u_grid = Grid1D::equidistant(0.0, 1.0, ns)?;
    let model = RobustControlModel::new(
        s_grid,
        eps_grid,
        weights,
        u_grid,
        |s, eps, u| -(u - 0.5 * s - 0.3 * eps).powi(2),
        |_s, u| u,
        theta,
        beta,
    )?;
    Ok(Arc::new(model))
}
