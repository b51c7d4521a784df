//! Consumer bankruptcy with earnings and expense uncertainty.
//!
//! The state is `(i, d, z, eta, kappa)`: repayment status `i` in
//! `{R, B, E}` (repayment, bankruptcy, expense default), debt `d`, persistent
//! productivity `z`, transitory productivity `eta`, and an expense shock
//! `kappa`. Income is `z * eta`. An action chooses next-period status and
//! debt `(i', d')`; consumption is pinned down by the status budget:
//!
//! - in `R`, repaying means `c + d + kappa = z eta + q d'` over any debt
//!   choice `d'`, feasible when `c > 0`; filing for bankruptcy is always
//!   available and garnishes income immediately, `c = (1 - gamma_w) z eta`
//!   with `d' = 0`;
//! - in `B`, `c = (1 - gamma_w) z eta`, `d' = 0`, and `i'` is `R` or `E`;
//! - in `E`, `c = (1 - gamma_w) z eta`, the unpaid expense rolls into debt
//!   `d' = (kappa - gamma_w z eta)(1 + r_bar)` (clamped at zero and projected
//!   to the debt grid), and `i'` is `R` or `B`.
//!
//! The productivity processes live on Tauchen grids in logs and are
//! exponentiated to levels, so income is strictly positive and every state
//! keeps at least one feasible action. The expected-value factorization
//! integrates the three shock coordinates out: a reduced function has
//! arguments `(i', d', z)` only, three instead of five, which is what makes
//! refactored value function iteration dramatically cheaper per sweep.

use std::sync::Arc;

use serde::Deserialize;

use crate::dp::{DynamicProgram, PlanFactorization};
use crate::error::{DpError, Result};
use crate::models::finite_mdp::weighted_dot;
use crate::numerics::{linspace, tauchen};
use crate::space::StateActionSpace;
use crate::tables::HFn;

pub const STATUS_REPAY: usize = 0;
pub const STATUS_BANKRUPT: usize = 1;
pub const STATUS_EXPENSE_DEFAULT: usize = 2;

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct BankruptcyParams {
    /// Discount factor.
    pub beta: f64,
    /// CRRA curvature of one-period utility.
    pub sigma_u: f64,
    /// Wage garnishment rate while in bankruptcy or expense default.
    pub gamma_w: f64,
    /// Penalty interest on rolled-over expenses.
    pub r_bar: f64,
    /// Risk-free rate behind the constant bond price `q = 1 / (1 + r_f)`.
    pub r_f: f64,
    /// Persistence of log productivity.
    pub rho: f64,
    /// Innovation variance of log productivity.
    pub delta_sq: f64,
    /// Variance of transitory log productivity.
    pub eta_var: f64,
    /// Top of the debt grid.
    pub d_max: f64,
    /// Top of the expense grid (uniform weights on `[0, kappa_max]`).
    pub kappa_max: f64,
    /// Tauchen coverage in unconditional standard deviations.
    pub tauchen_m: f64,
}

impl Default for BankruptcyParams {
    fn default() -> Self {
        Self {
            beta: 0.94,
            sigma_u: 2.0,
            gamma_w: 0.355,
            r_bar: 0.2,
            r_f: 0.05,
            rho: 0.99,
            delta_sq: 0.007,
            eta_var: 0.043,
            d_max: 10.0,
            kappa_max: 2.0,
            tauchen_m: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct BankruptcyGrids {
    pub d: usize,
    pub z: usize,
    pub eta: usize,
    pub kappa: usize,
}

impl BankruptcyGrids {
    pub fn square(n: usize) -> Self {
        Self {
            d: n,
            z: n,
            eta: n,
            kappa: n,
        }
    }
}

fn crra(c: f64, sigma: f64) -> f64 {
    if c <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if (sigma - 1.0).abs() < 1e-12 {
        c.ln()
    } else {
        c.powf(1.0 - sigma) / (1.0 - sigma)
    }
}

#[derive(Debug)]
pub struct BankruptcyModel {
    params: BankruptcyParams,
    grids: BankruptcyGrids,
    space: StateActionSpace,
    d_grid: Vec<f64>,
    z_levels: Vec<f64>,
    eta_levels: Vec<f64>,
    kappa_grid: Vec<f64>,
    /// Joint shock weights per current `z`:
    /// `weights[z * chunk + (z' * n_eta + eta') * n_kappa + kappa']`,
    /// matching the state layout of a `(i', d')` slice of `v`.
    weights: Vec<f64>,
    /// Dense utility table `u[x * n_actions + a]`; minus infinity marks
    /// infeasible pairs.
    utility: Vec<f64>,
    /// Shock block size `n_z * n_eta * n_kappa`.
    chunk: usize,
    u_min: f64,
}

/// Number of states, `3 * nd * nz * neta * nkappa`.
fn n_states(g: &BankruptcyGrids) -> usize {
    3 * g.d * g.z * g.eta * g.kappa
}

/// Builds the model with its expected-value factorization.
pub fn build_bankruptcy(
    params: BankruptcyParams,
    grids: BankruptcyGrids,
) -> Result<(Arc<BankruptcyModel>, BankruptcyFactorization)> {
    let model = Arc::new(BankruptcyModel::new(params, grids)?);
    let pf = BankruptcyFactorization {
        model: model.clone(),
    };
    Ok((model, pf))
}

impl BankruptcyModel {
    pub fn new(params: BankruptcyParams, grids: BankruptcyGrids) -> Result<Self> {
        if !(0.0 < params.beta && params.beta < 1.0) {
            return Err(DpError::Parameter(format!(
                "discount factor {} outside (0, 1)",
                params.beta
            )));
        }
        if !(0.0..1.0).contains(&params.gamma_w) {
            return Err(DpError::Parameter(format!(
                "garnishment rate {} outside [0, 1)",
                params.gamma_w
            )));
        }
        for (name, n) in [
            ("d", grids.d),
            ("z", grids.z),
            ("eta", grids.eta),
            ("kappa", grids.kappa),
        ] {
            if n < 2 {
                return Err(DpError::Parameter(format!(
                    "grid {name} needs at least 2 points, got {n}"
                )));
            }
        }

        let d_grid = linspace(0.0, params.d_max, grids.d);
        let kappa_grid = linspace(0.0, params.kappa_max, grids.kappa);
        let w_kappa = 1.0 / grids.kappa as f64;

        let (log_z, p_z) = tauchen(params.rho, params.delta_sq.sqrt(), grids.z, params.tauchen_m)?;
        let z_levels: Vec<f64> = log_z.points().iter().map(|&x| x.exp()).collect();
        // transitory shock: an i.i.d. chain, all rows identical
        let (log_eta, p_eta) = tauchen(0.0, params.eta_var.sqrt(), grids.eta, params.tauchen_m)?;
        let eta_levels: Vec<f64> = log_eta.points().iter().map(|&x| x.exp()).collect();
        let w_eta = p_eta[0].clone();

        let chunk = grids.z * grids.eta * grids.kappa;
        let mut weights = vec![0.0; grids.z * chunk];
        for z in 0..grids.z {
            for zn in 0..grids.z {
                for en in 0..grids.eta {
                    let w = p_z[z][zn] * w_eta[en] * w_kappa;
                    let base = z * chunk + (zn * grids.eta + en) * grids.kappa;
                    for slot in &mut weights[base..base + grids.kappa] {
                        *slot = w;
                    }
                }
            }
        }

        let nd = grids.d;
        let n_actions = 3 * nd;
        let n = n_states(&grids);
        let q = 1.0 / (1.0 + params.r_f);
        let mut utility = vec![f64::NEG_INFINITY; n * n_actions];
        let mut feasible: Vec<Vec<usize>> = Vec::with_capacity(n);
        let mut u_min = f64::INFINITY;

        let action_of = |i_next: usize, d_next: usize| i_next * nd + d_next;
        let mut x = 0;
        for i in 0..3 {
            for d in 0..nd {
                for z in 0..grids.z {
                    for eta in 0..grids.eta {
                        for kappa in 0..grids.kappa {
                            let income = z_levels[z] * eta_levels[eta];
                            let garnished = (1.0 - params.gamma_w) * income;
                            let mut feas = Vec::new();
                            let mut push = |a: usize, c: f64, feas: &mut Vec<usize>| {
                                if c > 0.0 {
                                    let u = crra(c, params.sigma_u);
                                    utility[x * n_actions + a] = u;
                                    if u < u_min {
                                        u_min = u;
                                    }
                                    feas.push(a);
                                }
                            };
                            match i {
                                STATUS_REPAY => {
                                    for (dn, &d_next) in d_grid.iter().enumerate() {
                                        let c = income + q * d_next
                                            - d_grid[d]
                                            - kappa_grid[kappa];
                                        push(action_of(STATUS_REPAY, dn), c, &mut feas);
                                    }
                                    push(
                                        action_of(STATUS_BANKRUPT, 0),
                                        garnished,
                                        &mut feas,
                                    );
                                }
                                STATUS_BANKRUPT => {
                                    push(action_of(STATUS_REPAY, 0), garnished, &mut feas);
                                    push(
                                        action_of(STATUS_EXPENSE_DEFAULT, 0),
                                        garnished,
                                        &mut feas,
                                    );
                                }
                                STATUS_EXPENSE_DEFAULT => {
                                    let rolled = (kappa_grid[kappa] - params.gamma_w * income)
                                        .max(0.0)
                                        * (1.0 + params.r_bar);
                                    let dn = nearest_index(&d_grid, rolled.min(params.d_max));
                                    push(action_of(STATUS_REPAY, dn), garnished, &mut feas);
                                    push(action_of(STATUS_BANKRUPT, dn), garnished, &mut feas);
                                }
                                _ => unreachable!(),
                            }
                            if feas.is_empty() {
                                return Err(DpError::EmptyFeasibleSet { state: x });
                            }
                            feasible.push(feas);
                            x += 1;
                        }
                    }
                }
            }
        }
        let space = StateActionSpace::new(n, n_actions, feasible)?;
        Ok(Self {
            params,
            grids,
            space,
            d_grid,
            z_levels,
            eta_levels,
            kappa_grid,
            weights,
            utility,
            chunk,
            u_min,
        })
    }

    pub fn grids(&self) -> BankruptcyGrids {
        self.grids
    }

    pub fn params(&self) -> &BankruptcyParams {
        &self.params
    }

    /// Decodes a state index into `(i, d, z, eta, kappa)` coordinates.
    pub fn decode(&self, x: usize) -> (usize, usize, usize, usize, usize) {
        let g = &self.grids;
        let kappa = x % g.kappa;
        let eta = (x / g.kappa) % g.eta;
        let z = (x / (g.kappa * g.eta)) % g.z;
        let d = (x / self.chunk) % g.d;
        let i = x / (g.d * self.chunk);
        (i, d, z, eta, kappa)
    }

    pub fn encode(&self, i: usize, d: usize, z: usize, eta: usize, kappa: usize) -> usize {
        ((i * self.grids.d + d) * self.chunk)
            + (z * self.grids.eta + eta) * self.grids.kappa
            + kappa
    }

    pub fn income(&self, x: usize) -> f64 {
        let (_, _, z, eta, _) = self.decode(x);
        self.z_levels[z] * self.eta_levels[eta]
    }

    pub fn debt_grid(&self) -> &[f64] {
        &self.d_grid
    }

    pub fn expense_grid(&self) -> &[f64] {
        &self.kappa_grid
    }

    /// Reduced-domain size of the expected-value factorization,
    /// `3 * nd * nz`.
    pub fn reduced_len(&self) -> usize {
        3 * self.grids.d * self.grids.z
    }

    #[inline]
    fn z_of(&self, x: usize) -> usize {
        (x / (self.grids.kappa * self.grids.eta)) % self.grids.z
    }

    #[inline]
    fn expected_next(&self, action: usize, z: usize, v: &[f64]) -> f64 {
        let w = &self.weights[z * self.chunk..(z + 1) * self.chunk];
        let slice = &v[action * self.chunk..(action + 1) * self.chunk];
        weighted_dot(w, slice)
    }
}

fn nearest_index(grid: &[f64], value: f64) -> usize {
    let hi = grid.partition_point(|&p| p < value);
    if hi == 0 {
        return 0;
    }
    if hi == grid.len() {
        return grid.len() - 1;
    }
    if (value - grid[hi - 1]) <= (grid[hi] - value) {
        hi - 1
    } else {
        hi
    }
}

impl DynamicProgram for BankruptcyModel {
    fn space(&self) -> &StateActionSpace {
        &self.space
    }

    fn aggregator(&self, x: usize, a: usize, v: &[f64]) -> f64 {
        let u = self.utility[x * self.space.n_actions() + a];
        if u == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        u + self.params.beta * self.expected_next(a, self.z_of(x), v)
    }

    fn discount(&self) -> f64 {
        self.params.beta
    }

    fn reward_lower_bound(&self) -> Option<f64> {
        Some(self.u_min)
    }
}

/// Expected-value factorization onto `(i', d', z)`:
/// `W0 v (i', d', z) = E[v(i', d', z', eta', kappa') | z]` and
/// `W1 g (x, (i', d')) = u(c(x, i', d')) + beta g(i', d', z_x)`.
///
/// The reduced index is `(i' * nd + d') * nz + z`, i.e. action-major.
pub struct BankruptcyFactorization {
    model: Arc<BankruptcyModel>,
}

impl PlanFactorization for BankruptcyFactorization {
    fn reduced_len(&self) -> usize {
        self.model.reduced_len()
    }

    fn is_monotone(&self) -> bool {
        true
    }

    fn w0(&self, v: &[f64], out: &mut [f64]) {
        let nz = self.model.grids.z;
        for (red, o) in out.iter_mut().enumerate() {
            let action = red / nz;
            let z = red % nz;
            *o = self.model.expected_next(action, z, v);
        }
    }

    fn w1(&self, g: &[f64], out: &mut HFn) {
        let m = &self.model;
        let nz = m.grids.z;
        let na = m.space.n_actions();
        let beta = m.params.beta;
        let mut pair = 0;
        for x in 0..m.space.n_states() {
            let z = m.z_of(x);
            for &a in m.space.feasible(x) {
                out.values[pair] = m.utility[x * na + a] + beta * g[a * nz + z];
                pair += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::lift_v_to_g;
    use crate::solvers::{rvfi, vfi, SolveConfig};
    use crate::tables::{sup_norm_diff, RefactoredFn, ValueFn};

    fn small() -> (Arc<BankruptcyModel>, BankruptcyFactorization) {
        build_bankruptcy(BankruptcyParams::default(), BankruptcyGrids::square(4)).unwrap()
    }

    #[test]
    fn reduced_domain_has_three_arguments_against_five() {
        let (model, pf) = small();
        assert_eq!(model.space().n_states(), 3 * 4 * 4 * 4 * 4);
        assert_eq!(pf.reduced_len(), 3 * 4 * 4);
    }

    #[test]
    fn bankruptcy_state_forces_zero_debt_and_garnished_consumption() {
        let (model, _) = small();
        let x = model.encode(STATUS_BANKRUPT, 2, 1, 3, 2);
        let nd = model.grids.d;
        assert_eq!(
            model.space().feasible(x),
            &[STATUS_REPAY * nd, STATUS_EXPENSE_DEFAULT * nd]
        );
        let c = (1.0 - model.params.gamma_w) * model.income(x);
        let u = model.utility[x * model.space().n_actions() + STATUS_REPAY * nd];
        assert!((u - crra(c, 2.0)).abs() < 1e-12);
    }

    #[test]
    fn expense_default_rolls_unpaid_expenses_into_debt_with_a_floor_at_zero() {
        let (model, _) = small();
        // kappa = 0 makes kappa - gamma_w * income negative: clamp to zero debt
        let x = model.encode(STATUS_EXPENSE_DEFAULT, 1, 2, 2, 0);
        let nd = model.grids.d;
        assert_eq!(
            model.space().feasible(x),
            &[STATUS_REPAY * nd + 0, STATUS_BANKRUPT * nd + 0]
        );
        // the largest expense shock on a poor state rolls into positive debt
        let x = model.encode(STATUS_EXPENSE_DEFAULT, 1, 0, 0, model.grids.kappa - 1);
        let rolled = (model.kappa_grid[model.grids.kappa - 1]
            - model.params.gamma_w * model.income(x))
            * (1.0 + model.params.r_bar);
        let expect = nearest_index(&model.d_grid, rolled.min(model.params.d_max));
        assert!(expect > 0);
        assert_eq!(
            model.space().feasible(x),
            &[STATUS_REPAY * nd + expect, STATUS_BANKRUPT * nd + expect]
        );
    }

    #[test]
    fn crushing_debt_leaves_only_the_bankruptcy_filing() {
        let (model, _) = small();
        // highest debt, lowest income, highest expense: no repayment budget
        // clears, but filing is always open
        let x = model.encode(
            STATUS_REPAY,
            model.grids.d - 1,
            0,
            0,
            model.grids.kappa - 1,
        );
        let nd = model.grids.d;
        assert_eq!(model.space().feasible(x), &[STATUS_BANKRUPT * nd]);
    }

    #[test]
    fn incomes_are_strictly_positive() {
        let (model, _) = small();
        for x in 0..model.space().n_states() {
            assert!(model.income(x) > 0.0);
        }
    }

    #[test]
    fn factorization_validity_on_random_tables() {
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let (model, pf) = small();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let n = model.space().n_states();
        let mut h = crate::tables::HFn::zeros(model.space());
        for _ in 0..5 {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let mut g = vec![0.0; pf.reduced_len()];
            pf.w0(&v, &mut g);
            pf.w1(&g, &mut h);
            for (pair, x, a) in model.space().pairs() {
                let direct = model.aggregator(x, a, &v);
                let viafac = h.values[pair];
                let scale = direct.abs().max(1.0);
                assert!(
                    (direct - viafac).abs() <= 1e-12 * scale,
                    "pair {pair}: {direct} vs {viafac}"
                );
            }
        }
    }

    #[test]
    fn both_solvers_reach_the_same_policy_on_a_small_grid() {
        let (model, pf) = small();
        let cfg = SolveConfig::default();
        let n = model.space().n_states();
        let v0 = ValueFn::zeros(n);
        let g0 = lift_v_to_g(&pf, &v0);
        let (v_bar, pol_v, rep_v) = vfi(model.as_ref(), &v0, &cfg).unwrap();
        let (g_bar, pol_g, rep_g) = rvfi(model.as_ref(), &pf, &g0, &cfg).unwrap();
        assert!(rep_v.converged && rep_g.converged);
        assert_eq!(pol_v, pol_g, "solver policies diverged");
        let lifted = lift_v_to_g(&pf, &v_bar);
        assert!(sup_norm_diff(&lifted.0, &g_bar.0) < 10.0 * cfg.tol);
        // iteration counts track each other through the conjugacy
        assert!((rep_v.iterations as i64 - rep_g.iterations as i64).abs() <= 1);
        let _ = RefactoredFn(g_bar.0);
    }

    #[test]
    fn tiny_grids_are_rejected() {
        let err = BankruptcyModel::new(BankruptcyParams::default(), BankruptcyGrids {
            d: 1,
            z: 4,
            eta: 4,
            kappa: 4,
        });
        assert!(err.is_err());
    }
}
