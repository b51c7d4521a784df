//! Fixed-point algorithms: value function iteration on `T`, refactored value
//! function iteration on `S`, optimistic policy iteration in both forms,
//! policy evaluation (direct linear solve for additive models, iteration
//! otherwise), a brute-force optimality oracle over the whole policy space,
//! and an empirical contraction-modulus probe.
//!
//! Convergence is measured on successive iterates in the supremum norm.
//! Solvers refuse discount factors of one or above unless the model is
//! flagged analytic.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dp::{DynamicProgram, PlanFactorization};
use crate::error::{DpError, Result};
use crate::operators::{
    bellman_t_into, greedy_from_g, greedy_from_v, policy_s_sigma_into, policy_t_sigma_into,
    refactored_s_into, SweepBuffers,
};
use crate::tables::{sup_norm_diff, Policy, RefactoredFn, ValueFn};

/// Policy evaluation switches from the dense linear solve to iteration above
/// this state count.
const LINEAR_SOLVE_MAX_STATES: usize = 2048;

/// Brute-force enumeration guard on `prod_x |Gamma(x)|`.
pub const POLICY_ENUMERATION_GUARD: f64 = 1e6;

/// Stopping rule and iteration budget shared by all solvers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveConfig {
    /// Sup-norm threshold on successive iterates.
    pub tol: f64,
    /// Iteration cap; exceeding it yields a non-converged report, not an error.
    pub max_iter: usize,
    /// Partial-evaluation step counts `m_k` for optimistic policy iteration;
    /// the last entry repeats forever, so a single entry means constant `m`.
    pub m_steps: Vec<usize>,
    /// Parallelize sweeps across the output index (bit-identical results for
    /// any thread count; only worthwhile on large state spaces).
    pub parallel: bool,
    /// Record the per-iteration gap sequence in the report.
    pub trace: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_iter: 50_000,
            m_steps: vec![10],
            parallel: false,
            trace: false,
        }
    }
}

impl SolveConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(DpError::Parameter(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(DpError::Parameter("max_iter must be at least 1".into()));
        }
        if self.m_steps.is_empty() || self.m_steps.iter().any(|&m| m == 0) {
            return Err(DpError::Parameter(
                "m_steps must be a nonempty sequence of positive integers".into(),
            ));
        }
        Ok(())
    }

    fn m_at(&self, k: usize) -> usize {
        *self.m_steps.get(k).unwrap_or_else(|| {
            self.m_steps.last().expect("validated nonempty")
        })
    }
}

/// Convergence metadata of a solver run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_gap: f64,
    pub converged: bool,
    /// Seconds.
    pub wall_time: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<f64>>,
}

fn check_discount(dp: &dyn DynamicProgram) -> Result<()> {
    if dp.discount() >= 1.0 && !dp.is_analytic() {
        return Err(DpError::UnstableDiscount {
            discount: dp.discount(),
        });
    }
    Ok(())
}

/// Value function iteration: applies `T` until the sup-norm gap between
/// successive iterates falls below `cfg.tol`. Returns the final iterate, its
/// greedy policy, and the run report (non-convergence is flagged, not fatal).
pub fn vfi(
    dp: &dyn DynamicProgram,
    v0: &ValueFn,
    cfg: &SolveConfig,
) -> Result<(ValueFn, Policy, SolveReport)> {
    cfg.validate()?;
    check_discount(dp)?;
    let n = dp.space().n_states();
    if v0.len() != n {
        return Err(DpError::Dimension(format!(
            "v0 has {} entries, state space has {n}",
            v0.len()
        )));
    }
    let start = Instant::now();
    let mut cur = v0.0.clone();
    let mut next = vec![0.0; n];
    let mut pol = vec![0usize; n];
    let mut trace = cfg.trace.then(Vec::new);
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        bellman_t_into(dp, &cur, &mut next, &mut pol, cfg.parallel)?;
        gap = sup_norm_diff(&cur, &next);
        std::mem::swap(&mut cur, &mut next);
        iterations += 1;
        if let Some(t) = trace.as_mut() {
            t.push(gap);
        }
        if gap < cfg.tol {
            break;
        }
    }
    let v = ValueFn(cur);
    let policy = greedy_from_v(dp, &v)?;
    let report = SolveReport {
        iterations,
        final_gap: gap,
        converged: gap < cfg.tol,
        wall_time: start.elapsed().as_secs_f64(),
        trace,
    };
    Ok((v, policy, report))
}

/// Refactored value function iteration: applies `S` on the reduced domain
/// until successive iterates are within `cfg.tol`, then extracts the g-greedy
/// policy of the final iterate.
pub fn rvfi(
    dp: &dyn DynamicProgram,
    pf: &dyn PlanFactorization,
    g0: &RefactoredFn,
    cfg: &SolveConfig,
) -> Result<(RefactoredFn, Policy, SolveReport)> {
    cfg.validate()?;
    check_discount(dp)?;
    let m = pf.reduced_len();
    if g0.len() != m {
        return Err(DpError::Dimension(format!(
            "g0 has {} entries, reduced domain has {m}",
            g0.len()
        )));
    }
    let start = Instant::now();
    let mut buf = SweepBuffers::new(dp);
    let mut cur = g0.0.clone();
    let mut next = vec![0.0; m];
    let mut trace = cfg.trace.then(Vec::new);
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        refactored_s_into(dp, pf, &cur, &mut next, &mut buf, cfg.parallel)?;
        gap = sup_norm_diff(&cur, &next);
        std::mem::swap(&mut cur, &mut next);
        iterations += 1;
        if let Some(t) = trace.as_mut() {
            t.push(gap);
        }
        if gap < cfg.tol {
            break;
        }
    }
    let g = RefactoredFn(cur);
    let policy = greedy_from_g(dp, pf, &g)?;
    let report = SolveReport {
        iterations,
        final_gap: gap,
        converged: gap < cfg.tol,
        wall_time: start.elapsed().as_secs_f64(),
        trace,
    };
    Ok((g, policy, report))
}

/// Per-outer-iteration record of an optimistic policy iteration run: the
/// greedy policy chosen at each step and the iterate it was chosen from.
#[derive(Debug, Clone)]
pub struct OpiTrace {
    pub policies: Vec<Policy>,
    pub iterates: Vec<Vec<f64>>,
}

/// Optimistic policy iteration: alternates greedy improvement with `m_k`
/// partial policy-evaluation sweeps, `v_{k+1} = T_{sigma_k}^{m_k} v_k`, until
/// successive outer iterates are within tolerance. With `m_k = 1` this is
/// exactly value function iteration.
pub fn opi(
    dp: &dyn DynamicProgram,
    v0: &ValueFn,
    cfg: &SolveConfig,
) -> Result<(ValueFn, Policy, SolveReport)> {
    opi_traced(dp, v0, cfg).map(|(v, p, r, _)| (v, p, r))
}

/// [`opi`] with the greedy-policy and iterate sequences recorded. Intended
/// for small instances; the trace stores every outer iterate.
pub fn opi_traced(
    dp: &dyn DynamicProgram,
    v0: &ValueFn,
    cfg: &SolveConfig,
) -> Result<(ValueFn, Policy, SolveReport, OpiTrace)> {
    cfg.validate()?;
    check_discount(dp)?;
    let n = dp.space().n_states();
    if v0.len() != n {
        return Err(DpError::Dimension(format!(
            "v0 has {} entries, state space has {n}",
            v0.len()
        )));
    }
    let start = Instant::now();
    let mut cur = v0.0.clone();
    let mut next = vec![0.0; n];
    let mut pol = vec![0usize; n];
    let mut trace = cfg.trace.then(Vec::new);
    let mut opi_trace = OpiTrace {
        policies: Vec::new(),
        iterates: Vec::new(),
    };
    let mut gap = f64::INFINITY;
    let mut outer = 0;
    while outer < cfg.max_iter {
        opi_trace.iterates.push(cur.clone());
        // The first partial-evaluation sweep coincides with a full Bellman
        // sweep because sigma_k is greedy for v_k; it also yields sigma_k.
        bellman_t_into(dp, &cur, &mut next, &mut pol, cfg.parallel)?;
        let sigma = Policy(pol.clone());
        std::mem::swap(&mut cur, &mut next);
        for _ in 1..cfg.m_at(outer) {
            policy_t_sigma_into(dp, &sigma, &cur, &mut next, cfg.parallel)?;
            std::mem::swap(&mut cur, &mut next);
        }
        opi_trace.policies.push(sigma);
        gap = sup_norm_diff(&cur, opi_trace.iterates.last().expect("pushed above"));
        outer += 1;
        if let Some(t) = trace.as_mut() {
            t.push(gap);
        }
        if gap < cfg.tol {
            break;
        }
    }
    opi_trace.iterates.push(cur.clone());
    let v = ValueFn(cur);
    let policy = greedy_from_v(dp, &v)?;
    let report = SolveReport {
        iterations: outer,
        final_gap: gap,
        converged: gap < cfg.tol,
        wall_time: start.elapsed().as_secs_f64(),
        trace,
    };
    Ok((v, policy, report, opi_trace))
}

/// Refactored optimistic policy iteration:
/// `g_{k+1} = S_{sigma_k}^{m_k} g_k` with `sigma_k` g-greedy for `g_k`.
pub fn refactored_opi(
    dp: &dyn DynamicProgram,
    pf: &dyn PlanFactorization,
    g0: &RefactoredFn,
    cfg: &SolveConfig,
) -> Result<(RefactoredFn, Policy, SolveReport)> {
    refactored_opi_traced(dp, pf, g0, cfg).map(|(g, p, r, _)| (g, p, r))
}

/// [`refactored_opi`] with the greedy-policy and iterate sequences recorded.
pub fn refactored_opi_traced(
    dp: &dyn DynamicProgram,
    pf: &dyn PlanFactorization,
    g0: &RefactoredFn,
    cfg: &SolveConfig,
) -> Result<(RefactoredFn, Policy, SolveReport, OpiTrace)> {
    cfg.validate()?;
    check_discount(dp)?;
    let m = pf.reduced_len();
    if g0.len() != m {
        return Err(DpError::Dimension(format!(
            "g0 has {} entries, reduced domain has {m}",
            g0.len()
        )));
    }
    let start = Instant::now();
    let mut buf = SweepBuffers::new(dp);
    let mut cur = g0.0.clone();
    let mut next = vec![0.0; m];
    let mut trace = cfg.trace.then(Vec::new);
    let mut opi_trace = OpiTrace {
        policies: Vec::new(),
        iterates: Vec::new(),
    };
    let mut gap = f64::INFINITY;
    let mut outer = 0;
    while outer < cfg.max_iter {
        opi_trace.iterates.push(cur.clone());
        // One S sweep: its internal maximization yields the g-greedy policy,
        // and S g_k = S_{sigma_k} g_k at that policy.
        refactored_s_into(dp, pf, &cur, &mut next, &mut buf, cfg.parallel)?;
        let sigma = Policy(buf.pol.clone());
        std::mem::swap(&mut cur, &mut next);
        for _ in 1..cfg.m_at(outer) {
            policy_s_sigma_into(dp, pf, &sigma, &cur, &mut next, &mut buf)?;
            std::mem::swap(&mut cur, &mut next);
        }
        opi_trace.policies.push(sigma);
        gap = sup_norm_diff(&cur, opi_trace.iterates.last().expect("pushed above"));
        outer += 1;
        if let Some(t) = trace.as_mut() {
            t.push(gap);
        }
        if gap < cfg.tol {
            break;
        }
    }
    opi_trace.iterates.push(cur.clone());
    let g = RefactoredFn(cur);
    let policy = greedy_from_g(dp, pf, &g)?;
    let report = SolveReport {
        iterations: outer,
        final_gap: gap,
        converged: gap < cfg.tol,
        wall_time: start.elapsed().as_secs_f64(),
        trace,
    };
    Ok((g, policy, report, opi_trace))
}

/// The sigma-value function: fixed point of `T_sigma`.
///
/// Additive finite models are solved directly via `(I - beta P_sigma) v =
/// r_sigma`; everything else (and any singular system) falls back to
/// iterating `T_sigma` from zero. The report's `final_gap` is the residual
/// `||T_sigma v - v||` of the returned table.
pub fn policy_value(
    dp: &dyn DynamicProgram,
    sigma: &Policy,
    cfg: &SolveConfig,
) -> Result<(ValueFn, SolveReport)> {
    cfg.validate()?;
    check_discount(dp)?;
    dp.space().check_policy(&sigma.0)?;
    let n = dp.space().n_states();
    if n <= LINEAR_SOLVE_MAX_STATES {
        if let Some((r, p)) = dp.sigma_affine(sigma) {
            let start = Instant::now();
            let beta = dp.discount();
            let mut a = DMatrix::identity(n, n);
            for (i, row) in p.iter().enumerate() {
                for (j, &pij) in row.iter().enumerate() {
                    a[(i, j)] -= beta * pij;
                }
            }
            if let Some(v) = a.lu().solve(&DVector::from_vec(r)) {
                let v = ValueFn(v.iter().copied().collect());
                let mut residual = vec![0.0; n];
                policy_t_sigma_into(dp, sigma, v.as_slice(), &mut residual, false)?;
                let gap = sup_norm_diff(&residual, v.as_slice());
                return Ok((
                    v,
                    SolveReport {
                        iterations: 1,
                        final_gap: gap,
                        converged: gap < cfg.tol,
                        wall_time: start.elapsed().as_secs_f64(),
                        trace: None,
                    },
                ));
            }
            // singular system: fall through to iteration
        }
    }
    policy_value_iterative(dp, sigma, cfg)
}

/// Policy evaluation by iterating `T_sigma` from zero; the dual route to the
/// linear solve inside [`policy_value`].
pub fn policy_value_iterative(
    dp: &dyn DynamicProgram,
    sigma: &Policy,
    cfg: &SolveConfig,
) -> Result<(ValueFn, SolveReport)> {
    cfg.validate()?;
    check_discount(dp)?;
    dp.space().check_policy(&sigma.0)?;
    let n = dp.space().n_states();
    let start = Instant::now();
    let mut cur = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        policy_t_sigma_into(dp, sigma, &cur, &mut next, cfg.parallel)?;
        gap = sup_norm_diff(&cur, &next);
        std::mem::swap(&mut cur, &mut next);
        iterations += 1;
        if gap < cfg.tol {
            break;
        }
    }
    Ok((
        ValueFn(cur),
        SolveReport {
            iterations,
            final_gap: gap,
            converged: gap < cfg.tol,
            wall_time: start.elapsed().as_secs_f64(),
            trace: None,
        },
    ))
}

/// The refactored sigma-value function: fixed point of `S_sigma`, found by
/// iterating from `W0(0)` (a start that stays inside the domain of models
/// whose `W1` takes logarithms).
pub fn refactored_policy_value(
    dp: &dyn DynamicProgram,
    pf: &dyn PlanFactorization,
    sigma: &Policy,
    cfg: &SolveConfig,
) -> Result<(RefactoredFn, SolveReport)> {
    cfg.validate()?;
    check_discount(dp)?;
    dp.space().check_policy(&sigma.0)?;
    let m = pf.reduced_len();
    let start = Instant::now();
    let mut buf = SweepBuffers::new(dp);
    let zeros = vec![0.0; dp.space().n_states()];
    let mut cur = vec![0.0; m];
    pf.w0(&zeros, &mut cur);
    let mut next = vec![0.0; m];
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        policy_s_sigma_into(dp, pf, sigma, &cur, &mut next, &mut buf)?;
        gap = sup_norm_diff(&cur, &next);
        std::mem::swap(&mut cur, &mut next);
        iterations += 1;
        if gap < cfg.tol {
            break;
        }
    }
    Ok((
        RefactoredFn(cur),
        SolveReport {
            iterations,
            final_gap: gap,
            converged: gap < cfg.tol,
            wall_time: start.elapsed().as_secs_f64(),
            trace: None,
        },
    ))
}

/// Enumerates every feasible policy of the space in odometer order.
fn for_each_policy<F>(dp: &dyn DynamicProgram, mut f: F) -> Result<()>
where
    F: FnMut(&Policy) -> Result<()>,
{
    let space = dp.space();
    let n = space.n_states();
    let mut choice = vec![0usize; n];
    loop {
        let sigma = Policy(
            choice
                .iter()
                .enumerate()
                .map(|(x, &j)| space.feasible(x)[j])
                .collect(),
        );
        f(&sigma)?;
        // odometer increment
        let mut x = 0;
        loop {
            if x == n {
                return Ok(());
            }
            choice[x] += 1;
            if choice[x] < space.feasible(x).len() {
                break;
            }
            choice[x] = 0;
            x += 1;
        }
    }
}

/// Brute-force optimality oracle: enumerates all feasible policies, evaluates
/// each sigma-value function, and returns the pointwise suprema
/// `v*(x) = sup_sigma v_sigma(x)` and `g*(x, a) = sup_sigma (W0 v_sigma)(x, a)`.
///
/// Refuses policy spaces larger than [`POLICY_ENUMERATION_GUARD`].
pub fn brute_force_oracle(
    dp: &dyn DynamicProgram,
    pf: &dyn PlanFactorization,
    cfg: &SolveConfig,
) -> Result<(ValueFn, RefactoredFn)> {
    cfg.validate()?;
    if dp.discount() >= 1.0 {
        return Err(DpError::UnstableDiscount {
            discount: dp.discount(),
        });
    }
    let count = dp.space().policy_count();
    if count > POLICY_ENUMERATION_GUARD {
        return Err(DpError::PolicySpaceOverflow {
            count,
            guard: POLICY_ENUMERATION_GUARD,
        });
    }
    let n = dp.space().n_states();
    let m = pf.reduced_len();
    let mut v_star = vec![f64::NEG_INFINITY; n];
    let mut g_star = vec![f64::NEG_INFINITY; m];
    let mut g_sigma = vec![0.0; m];
    for_each_policy(dp, |sigma| {
        let (v_sigma, _) = policy_value(dp, sigma, cfg)?;
        pf.w0(v_sigma.as_slice(), &mut g_sigma);
        for (acc, &val) in v_star.iter_mut().zip(v_sigma.as_slice()) {
            if val > *acc {
                *acc = val;
            }
        }
        for (acc, &val) in g_star.iter_mut().zip(&g_sigma) {
            if val > *acc {
                *acc = val;
            }
        }
        Ok(())
    })?;
    Ok((ValueFn(v_star), RefactoredFn(g_star)))
}

/// Largest observed ratio `||op(g) - op(g')|| / ||g - g'||` over `n_pairs`
/// sampled pairs, in the sup norm. Degenerate pairs with `g = g'` are
/// skipped.
pub fn empirical_contraction_modulus<O, S>(mut op: O, mut sampler: S, n_pairs: usize) -> f64
where
    O: FnMut(&[f64]) -> Vec<f64>,
    S: FnMut() -> Vec<f64>,
{
    let mut modulus: f64 = 0.0;
    for _ in 0..n_pairs {
        let g = sampler();
        let g2 = sampler();
        let denom = sup_norm_diff(&g, &g2);
        if denom == 0.0 {
            continue;
        }
        let num = sup_norm_diff(&op(&g), &op(&g2));
        modulus = modulus.max(num / denom);
    }
    modulus
}
