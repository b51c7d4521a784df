//! Risk-sensitive control over a finite chain:
//! `H(x, a, v) = r(x, a) - (beta/gamma) log sum_x' exp(-gamma v(x')) p(x, a, x')`.
//!
//! Two factorizations are shipped. The monotone one extends the
//! expected-value transformation, putting the whole certainty-equivalent
//! term into `W0` so that `W1 g = r + g`. The non-monotone one splits at the
//! raw expectation, `W0 v = E[exp(-gamma v)]` and
//! `W1 g = r - (beta/gamma) log g`; it is a valid factorization of the same
//! aggregator but neither map is monotone, which breaks the optimality link
//! between the two fixed-point problems.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dp::{DynamicProgram, PlanFactorization};
use crate::error::{DpError, Result};
use crate::space::StateActionSpace;
use crate::tables::HFn;

const ROW_SUM_TOL: f64 = 1e-10;

#[derive(Debug)]
pub struct RiskSensitiveModel {
    space: StateActionSpace,
    rewards: Vec<f64>,
    /// Transition rows per feasible pair, flattened.
    trans: Vec<f64>,
    beta: f64,
    gamma: f64,
}

impl RiskSensitiveModel {
    pub fn new(
        space: StateActionSpace,
        rewards: Vec<f64>,
        trans_rows: Vec<Vec<f64>>,
        beta: f64,
        gamma: f64,
    ) -> Result<Self> {
        let n_pairs = space.n_pairs();
        let n_states = space.n_states();
        if rewards.len() != n_pairs || trans_rows.len() != n_pairs {
            return Err(DpError::Dimension(format!(
                "expected {n_pairs} rewards and transition rows, got {} and {}",
                rewards.len(),
                trans_rows.len()
            )));
        }
        if !(0.0..1.0).contains(&beta) {
            return Err(DpError::Parameter(format!(
                "discount factor {beta} outside [0, 1)"
            )));
        }
        if gamma == 0.0 {
            return Err(DpError::Parameter("risk parameter gamma must be nonzero".into()));
        }
        let mut trans = Vec::with_capacity(n_pairs * n_states);
        for (pair, row) in trans_rows.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.len() != n_states || (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(DpError::Parameter(format!(
                    "transition row {pair} is not a probability vector"
                )));
            }
            trans.extend_from_slice(row);
        }
        Ok(Self {
            space,
            rewards,
            trans,
            beta,
            gamma,
        })
    }

    pub fn random(
        n_states: usize,
        n_actions: usize,
        beta: f64,
        gamma: f64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let space = StateActionSpace::dense(n_states, n_actions);
        let rewards = (0..space.n_pairs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let trans_rows: Vec<Vec<f64>> = (0..space.n_pairs())
            .map(|_| {
                let mut row: Vec<f64> =
                    (0..n_states).map(|_| rng.gen_range(0.05..1.0)).collect();
                let sum: f64 = row.iter().sum();
                row.iter_mut().for_each(|p| *p /= sum);
                row
            })
            .collect();
        Self::new(space, rewards, trans_rows, beta, gamma).unwrap()
    }

    fn row(&self, pair: usize) -> &[f64] {
        let n = self.space.n_states();
        &self.trans[pair * n..(pair + 1) * n]
    }

    /// `-(beta/gamma) log sum_x' exp(-gamma v(x')) p`, evaluated with a
    /// max shift so the exponentials cannot overflow. The shift changes no
    /// mathematical value.
    fn certainty_equivalent(&self, pair: usize, v: &[f64]) -> f64 {
        let row = self.row(pair);
        let mut m = f64::NEG_INFINITY;
        for (&p, &vx) in row.iter().zip(v) {
            if p > 0.0 {
                m = m.max(-self.gamma * vx);
            }
        }
        let mut s = 0.0;
        for (&p, &vx) in row.iter().zip(v) {
            if p > 0.0 {
                s += p * (-self.gamma * vx - m).exp();
            }
        }
        -(self.beta / self.gamma) * (m + s.ln())
    }
}

impl DynamicProgram for RiskSensitiveModel {
    fn space(&self) -> &StateActionSpace {
        &self.space
    }

    fn aggregator(&self, x: usize, a: usize, v: &[f64]) -> f64 {
        let pair = self
            .space
            .pair_index(x, a)
            .expect("aggregator called on an infeasible pair");
        self.rewards[pair] + self.certainty_equivalent(pair, v)
    }

    fn discount(&self) -> f64 {
        self.beta
    }
}

/// Monotone factorization:
/// `W0 v (x, a) = -(beta/gamma) log E[exp(-gamma v) | x, a]`,
/// `W1 g (x, a) = r(x, a) + g(x, a)`.
pub struct RiskSensitiveFactorization {
    model: Arc<RiskSensitiveModel>,
}

impl PlanFactorization for RiskSensitiveFactorization {
    fn reduced_len(&self) -> usize {
        self.model.space.n_pairs()
    }

    fn is_monotone(&self) -> bool {
        true
    }

    fn w0(&self, v: &[f64], out: &mut [f64]) {
        for (pair, o) in out.iter_mut().enumerate() {
            *o = self.model.certainty_equivalent(pair, v);
        }
    }

    fn w1(&self, g: &[f64], out: &mut HFn) {
        for (pair, (o, r)) in out
            .values
            .iter_mut()
            .zip(&self.model.rewards)
            .enumerate()
        {
            *o = r + g[pair];
        }
    }
}

/// Non-monotone factorization of the same aggregator:
/// `W0 v (x, a) = E[exp(-gamma v) | x, a]`,
/// `W1 g (x, a) = r(x, a) - (beta/gamma) log g(x, a)`.
///
/// The exponential moment is stored raw (no shift), so extreme tables can
/// overflow; this factorization exists to witness what monotonicity buys,
/// not to be iterated at scale.
pub struct NonMonotoneRiskFactorization {
    model: Arc<RiskSensitiveModel>,
}

impl PlanFactorization for NonMonotoneRiskFactorization {
    fn reduced_len(&self) -> usize {
        self.model.space.n_pairs()
    }

    fn is_monotone(&self) -> bool {
        false
    }

    fn w0(&self, v: &[f64], out: &mut [f64]) {
        for (pair, o) in out.iter_mut().enumerate() {
            let row = self.model.row(pair);
            let mut s = 0.0;
            for (&p, &vx) in row.iter().zip(v) {
                s += p * (-self.model.gamma * vx).exp();
            }
            *o = s;
        }
    }

    fn w1(&self, g: &[f64], out: &mut HFn) {
        let (b, gm) = (self.model.beta, self.model.gamma);
        for (pair, (o, r)) in out
            .values
            .iter_mut()
            .zip(&self.model.rewards)
            .enumerate()
        {
            *o = r - (b / gm) * g[pair].ln();
        }
    }
}

/// Wraps a model with its monotone factorization.
pub fn build_risk_sensitive(
    model: Arc<RiskSensitiveModel>,
) -> (Arc<RiskSensitiveModel>, RiskSensitiveFactorization) {
    let pf = RiskSensitiveFactorization {
        model: model.clone(),
    };
    (model, pf)
}

/// The exp/log split with `monotone = false`.
pub fn nonmonotone_factorization(model: Arc<RiskSensitiveModel>) -> NonMonotoneRiskFactorization {
    NonMonotoneRiskFactorization { model }
}
