//! Finite-state Markov decision process with additively separable rewards:
//! `H(x, a, v) = r(x, a) + beta * sum_x' v(x') p(x, a, x')`, together with the
//! three canonical plan factorizations (identity, Q-factor, expected value).

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dp::{DynamicProgram, PlanFactorization};
use crate::error::{DpError, Result};
use crate::space::StateActionSpace;
use crate::tables::{HFn, Policy};

const ROW_SUM_TOL: f64 = 1e-10;

/// Tabulated finite MDP. Rewards and transition rows are stored per feasible
/// pair in the pair order of the space; each transition row is a probability
/// vector over next states.
#[derive(Debug)]
pub struct FiniteMdp {
    space: StateActionSpace,
    /// One reward per feasible pair.
    rewards: Vec<f64>,
    /// Transition rows, flattened: `trans[pair * n_states + x']`.
    trans: Vec<f64>,
    beta: f64,
}

impl FiniteMdp {
    pub fn new(
        space: StateActionSpace,
        rewards: Vec<f64>,
        trans_rows: Vec<Vec<f64>>,
        beta: f64,
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
        let mut trans = Vec::with_capacity(n_pairs * n_states);
        for (pair, row) in trans_rows.iter().enumerate() {
            if row.len() != n_states {
                return Err(DpError::Dimension(format!(
                    "transition row {pair} has {} entries, expected {n_states}",
                    row.len()
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL || row.iter().any(|&p| p < 0.0) {
                return Err(DpError::Parameter(format!(
                    "transition row {pair} is not a probability vector (sum {sum})"
                )));
            }
            trans.extend_from_slice(row);
        }
        Ok(Self {
            space,
            rewards,
            trans,
            beta,
        })
    }

    pub fn n_states(&self) -> usize {
        self.space.n_states()
    }

    pub fn reward(&self, pair: usize) -> f64 {
        self.rewards[pair]
    }

    pub fn transition_row(&self, pair: usize) -> &[f64] {
        let n = self.space.n_states();
        &self.trans[pair * n..(pair + 1) * n]
    }

    /// Conditional expectation `sum_x' v(x') p(x, a, x')` for a pair.
    pub fn expected_value(&self, pair: usize, v: &[f64]) -> f64 {
        weighted_dot(self.transition_row(pair), v)
    }

    /// A reproducible random instance: uniform rewards on [-1, 1], transition
    /// rows drawn uniformly then normalized, and (optionally) randomly
    /// restricted nonempty feasible sets.
    pub fn random(
        n_states: usize,
        n_actions: usize,
        beta: f64,
        restrict_feasible: bool,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let feasible: Vec<Vec<usize>> = (0..n_states)
            .map(|_| {
                if restrict_feasible {
                    let mut list: Vec<usize> =
                        (0..n_actions).filter(|_| rng.gen_bool(0.7)).collect();
                    if list.is_empty() {
                        list.push(rng.gen_range(0..n_actions));
                    }
                    list
                } else {
                    (0..n_actions).collect()
                }
            })
            .collect();
        let space = StateActionSpace::new(n_states, n_actions, feasible).unwrap();
        let rewards: Vec<f64> = (0..space.n_pairs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let trans_rows: Vec<Vec<f64>> = (0..space.n_pairs())
            .map(|_| {
                let mut row: Vec<f64> =
                    (0..n_states).map(|_| rng.gen_range(0.05..1.0)).collect();
                let sum: f64 = row.iter().sum();
                row.iter_mut().for_each(|p| *p /= sum);
                row
            })
            .collect();
        Self::new(space, rewards, trans_rows, beta).unwrap()
    }
}

/// Dot product with four independent accumulators: a fixed deterministic
/// summation order that still leaves the compiler room to vectorize.
#[inline]
pub(crate) fn weighted_dot(w: &[f64], v: &[f64]) -> f64 {
    let chunks = w.len() / 4;
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..chunks {
        let k = 4 * i;
        s0 += w[k] * v[k];
        s1 += w[k + 1] * v[k + 1];
        s2 += w[k + 2] * v[k + 2];
        s3 += w[k + 3] * v[k + 3];
    }
    let mut tail = 0.0;
    for k in (4 * chunks)..w.len() {
        tail += w[k] * v[k];
    }
    (s0 + s1) + (s2 + s3) + tail
}

impl DynamicProgram for FiniteMdp {
    fn space(&self) -> &StateActionSpace {
        &self.space
    }

    fn aggregator(&self, x: usize, a: usize, v: &[f64]) -> f64 {
        let pair = self
            .space
            .pair_index(x, a)
            .expect("aggregator called on an infeasible pair");
        self.rewards[pair] + self.beta * self.expected_value(pair, v)
    }

    fn discount(&self) -> f64 {
        self.beta
    }

    fn reward_lower_bound(&self) -> Option<f64> {
        self.rewards.iter().copied().reduce(f64::min)
    }

    fn sigma_affine(&self, sigma: &Policy) -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
        let n = self.space.n_states();
        let mut r = Vec::with_capacity(n);
        let mut p = Vec::with_capacity(n);
        for x in 0..n {
            let pair = self.space.pair_index(x, sigma.action(x))?;
            r.push(self.rewards[pair]);
            p.push(self.transition_row(pair).to_vec());
        }
        Some((r, p))
    }
}

/// Identity factorization: `W0 = I` on the state space, `W1 g (x, a) =
/// H(x, a, g)`. The refactored operator coincides with the Bellman operator.
pub struct IdentityFactorization<D> {
    dp: Arc<D>,
    monotone: bool,
}

impl<D: DynamicProgram> IdentityFactorization<D> {
    /// `monotone` declares whether `H` is monotone in its valuation argument,
    /// which is a per-model property.
    pub fn new(dp: Arc<D>, monotone: bool) -> Self {
        Self { dp, monotone }
    }
}

impl<D: DynamicProgram> PlanFactorization for IdentityFactorization<D> {
    fn reduced_len(&self) -> usize {
        self.dp.space().n_states()
    }

    fn is_monotone(&self) -> bool {
        self.monotone
    }

    fn w0(&self, v: &[f64], out: &mut [f64]) {
        out.copy_from_slice(v);
    }

    fn w1(&self, g: &[f64], out: &mut HFn) {
        for (pair, x, a) in self.dp.space().pairs() {
            out.values[pair] = self.dp.aggregator(x, a, g);
        }
    }
}

/// Q-factor factorization: `W0 v (x, a) = r(x, a) + beta * E[v | x, a]` and
/// `W1 = I`. Solving `g = S g` computes the optimal Q-factors.
pub struct QFactorFactorization {
    mdp: Arc<FiniteMdp>,
}

impl QFactorFactorization {
    pub fn new(mdp: Arc<FiniteMdp>) -> Self {
        Self { mdp }
    }
}

impl PlanFactorization for QFactorFactorization {
    fn reduced_len(&self) -> usize {
        self.mdp.space.n_pairs()
    }

    fn is_monotone(&self) -> bool {
        true
    }

    fn w0(&self, v: &[f64], out: &mut [f64]) {
        for (pair, o) in out.iter_mut().enumerate() {
            *o = self.mdp.rewards[pair] + self.mdp.beta * self.mdp.expected_value(pair, v);
        }
    }

    fn w1(&self, g: &[f64], out: &mut HFn) {
        out.values.copy_from_slice(g);
    }
}

/// Expected-value factorization: `W0 v (x, a) = E[v | x, a]` and
/// `W1 g (x, a) = r(x, a) + beta * g(x, a)`.
pub struct ExpectedValueFactorization {
    mdp: Arc<FiniteMdp>,
}

impl ExpectedValueFactorization {
    pub fn new(mdp: Arc<FiniteMdp>) -> Self {
        Self { mdp }
    }
}

impl PlanFactorization for ExpectedValueFactorization {
    fn reduced_len(&self) -> usize {
        self.mdp.space.n_pairs()
    }

    fn is_monotone(&self) -> bool {
        true
    }

    fn w0(&self, v: &[f64], out: &mut [f64]) {
        for (pair, o) in out.iter_mut().enumerate() {
            *o = self.mdp.expected_value(pair, v);
        }
    }

    fn w1(&self, g: &[f64], out: &mut HFn) {
        for (pair, (o, r)) in out.values.iter_mut().zip(&self.mdp.rewards).enumerate() {
            let _ = pair;
            *o = r + self.mdp.beta * g[pair];
        }
    }
}

/// The expected-value factorization of an MDP (Eq. form `r + beta g`).
pub fn expected_value_factorization(mdp: Arc<FiniteMdp>) -> ExpectedValueFactorization {
    ExpectedValueFactorization::new(mdp)
}

/// The Q-factor factorization of an MDP (`W1 = I`).
pub fn qfactor_factorization(mdp: Arc<FiniteMdp>) -> QFactorFactorization {
    QFactorFactorization::new(mdp)
}

/// The identity factorization of any dynamic program.
pub fn identity_factorization<D: DynamicProgram>(
    dp: Arc<D>,
    monotone: bool,
) -> IdentityFactorization<D> {
    IdentityFactorization::new(dp, monotone)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{bellman_t, refactored_s};
    use crate::tables::{sup_norm_diff, RefactoredFn, ValueFn};

    use rand_chacha::rand_core::SeedableRng;

    fn seeded(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// 2-state, 2-action MDP used by the entry-wise checks below.
    fn small_mdp() -> FiniteMdp {
        let space = StateActionSpace::dense(2, 2);
        let rewards = vec![1.0, 0.5, -0.3, 2.0];
        let trans = vec![
            vec![0.7, 0.3],
            vec![0.2, 0.8],
            vec![0.5, 0.5],
            vec![0.9, 0.1],
        ];
        FiniteMdp::new(space, rewards, trans, 0.9).unwrap()
    }

    #[test]
    fn transition_rows_must_be_probability_vectors() {
        let space = StateActionSpace::dense(1, 1);
        let err = FiniteMdp::new(space, vec![0.0], vec![vec![0.5]], 0.9).unwrap_err();
        assert!(matches!(err, DpError::Parameter(_)));
    }

    #[test]
    fn expected_value_of_a_constant_is_the_constant() {
        let mdp = small_mdp();
        let v = vec![3.25; 2];
        for pair in 0..mdp.space.n_pairs() {
            assert!((mdp.expected_value(pair, &v) - 3.25).abs() < 1e-12);
        }
    }

    #[test]
    fn qfactor_s_entrywise_on_a_two_state_mdp() {
        // (S g)(x, a) = r(x, a) + beta * sum_x' max_a' g(x', a') p(x, a, x')
        let mdp = Arc::new(small_mdp());
        let pf = qfactor_factorization(mdp.clone());
        let g = RefactoredFn(vec![0.4, -1.0, 2.2, 0.1]);
        let (sg, _) = refactored_s(mdp.as_ref(), &pf, &g).unwrap();
        let gmax = [g.0[0].max(g.0[1]), g.0[2].max(g.0[3])];
        for (pair, _x, _a) in mdp.space.pairs() {
            let row = mdp.transition_row(pair);
            let expect = mdp.rewards[pair] + 0.9 * (row[0] * gmax[0] + row[1] * gmax[1]);
            assert!((sg.0[pair] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn qfactor_with_zero_discount_returns_rewards_in_one_sweep() {
        let space = StateActionSpace::dense(2, 2);
        let rewards = vec![1.0, 0.5, -0.3, 2.0];
        let trans = vec![vec![0.5, 0.5]; 4];
        let mdp = Arc::new(FiniteMdp::new(space, rewards.clone(), trans, 0.0).unwrap());
        let pf = qfactor_factorization(mdp.clone());
        let g = RefactoredFn(vec![9.0, -9.0, 9.0, -9.0]);
        let (sg, _) = refactored_s(mdp.as_ref(), &pf, &g).unwrap();
        assert_eq!(sg.0, rewards);
    }

    #[test]
    fn expected_value_s_entrywise_matches_the_direct_sum() {
        // (S g)(x, a) = sum_x' max_a' { r(x', a') + beta g(x', a') } p(x, a, x')
        let mdp = Arc::new(small_mdp());
        let pf = expected_value_factorization(mdp.clone());
        let g = RefactoredFn(vec![1.2, 0.0, -0.5, 0.7]);
        let (sg, _) = refactored_s(mdp.as_ref(), &pf, &g).unwrap();
        let inner = |x: usize| -> f64 {
            let off = mdp.space.pair_offset(x);
            (0..2)
                .map(|j| mdp.rewards[off + j] + 0.9 * g.0[off + j])
                .fold(f64::NEG_INFINITY, f64::max)
        };
        for (pair, _x, _a) in mdp.space.pairs() {
            let row = mdp.transition_row(pair);
            let expect = row[0] * inner(0) + row[1] * inner(1);
            assert!((sg.0[pair] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn identity_factorization_makes_s_coincide_with_t() {
        let mut rng = seeded(11);
        for _ in 0..5 {
            let mdp = Arc::new(FiniteMdp::random(4, 3, 0.9, true, &mut rng));
            let pf = identity_factorization(mdp.clone(), true);
            let v = ValueFn((0..4).map(|_| rng.gen_range(-2.0..2.0)).collect());
            let (tv, _) = bellman_t(mdp.as_ref(), &v).unwrap();
            let (sg, _) = refactored_s(mdp.as_ref(), &pf, &RefactoredFn(v.0.clone())).unwrap();
            assert_eq!(tv.0, sg.0);
        }
    }

    #[test]
    fn random_instances_have_valid_rows_and_nonempty_feasible_sets() {
        let mut rng = seeded(7);
        for _ in 0..20 {
            let mdp = FiniteMdp::random(6, 4, 0.9, true, &mut rng);
            for x in 0..6 {
                assert!(!mdp.space.feasible(x).is_empty());
            }
            for pair in 0..mdp.space.n_pairs() {
                let sum: f64 = mdp.transition_row(pair).iter().sum();
                assert!((sum - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn constant_function_is_preserved_by_expected_value_w0() {
        let mdp = Arc::new(small_mdp());
        let pf = expected_value_factorization(mdp.clone());
        let mut out = vec![0.0; pf.reduced_len()];
        pf.w0(&[5.5, 5.5], &mut out);
        assert!(sup_norm_diff(&out, &vec![5.5; out.len()]) < 1e-12);
    }
}
