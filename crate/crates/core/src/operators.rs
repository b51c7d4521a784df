//! The operator algebra over tabulated function spaces: the maximization
//! maps `M` and `M_sigma`, the Bellman operator `T = M W1 W0`, the refactored
//! Bellman operator `S = W0 M W1`, their policy counterparts
//! `T_sigma = M_sigma W1 W0` and `S_sigma = W0 M_sigma W1`, greedy-policy
//! extraction, and the lift/lower maps between the two fixed-point spaces.
//!
//! All argmax operations break ties to the lowest action index, so greedy
//! policies extracted through the value path and through the reduced path are
//! exactly comparable. All operators are pure: they read immutable model data
//! and input tables and produce fresh output tables. Where a sweep is
//! parallelized it is parallel across the output index only; the reduction
//! within one output entry stays sequential in a fixed order, so results are
//! identical for any thread count.

use rayon::prelude::*;

use crate::dp::{DynamicProgram, PlanFactorization};
use crate::error::{DpError, Result};
use crate::tables::{HFn, Policy, RefactoredFn, ValueFn};

/// States below this count are always swept sequentially; rayon dispatch
/// costs more than the work it saves on desk-size models.
const PAR_MIN_STATES: usize = 4096;

fn check_v_len(dp: &dyn DynamicProgram, v: &ValueFn) -> Result<()> {
    if v.len() != dp.space().n_states() {
        return Err(DpError::Dimension(format!(
            "value table has {} entries, state space has {}",
            v.len(),
            dp.space().n_states()
        )));
    }
    Ok(())
}

fn check_g_len(pf: &dyn PlanFactorization, g: &RefactoredFn) -> Result<()> {
    if g.len() != pf.reduced_len() {
        return Err(DpError::Dimension(format!(
            "refactored table has {} entries, reduced domain has {}",
            g.len(),
            pf.reduced_len()
        )));
    }
    Ok(())
}

/// `(M h)(x) = max_{a in Gamma(x)} h(x, a)`, together with the argmax policy.
///
/// Ties break to the lowest action index. Minus-infinity entries lose every
/// comparison; a state whose entries are all minus infinity keeps value minus
/// infinity and its first feasible action.
pub fn apply_m(dp: &dyn DynamicProgram, h: &HFn) -> (ValueFn, Policy) {
    let space = dp.space();
    let n = space.n_states();
    let mut v = vec![0.0; n];
    let mut pol = vec![0usize; n];
    for x in 0..n {
        let feas = space.feasible(x);
        let off = space.pair_offset(x);
        let mut best = f64::NEG_INFINITY;
        let mut best_a = feas[0];
        for (j, &a) in feas.iter().enumerate() {
            let val = h.values[off + j];
            if val > best {
                best = val;
                best_a = a;
            }
        }
        v[x] = best;
        pol[x] = best_a;
    }
    (ValueFn(v), Policy(pol))
}

/// `(M_sigma h)(x) = h(x, sigma(x))`.
pub fn apply_m_sigma(dp: &dyn DynamicProgram, h: &HFn, sigma: &Policy) -> Result<ValueFn> {
    let space = dp.space();
    let mut v = vec![0.0; space.n_states()];
    for (x, out) in v.iter_mut().enumerate() {
        let a = sigma.action(x);
        let pair = space
            .pair_index(x, a)
            .ok_or(DpError::InfeasiblePolicy { state: x, action: a })?;
        *out = h.values[pair];
    }
    Ok(ValueFn(v))
}

/// One Bellman sweep written into preallocated buffers:
/// `out_v[x] = max_{a in Gamma(x)} H(x, a, v)` with `out_a` the argmax.
///
/// Evaluates the aggregator directly; no factorization is involved.
pub fn bellman_t_into(
    dp: &dyn DynamicProgram,
    v: &[f64],
    out_v: &mut [f64],
    out_a: &mut [usize],
    parallel: bool,
) -> Result<()> {
    let space = dp.space();
    let state_sweep = |x: usize, vo: &mut f64, ao: &mut usize| -> Result<()> {
        let feas = space.feasible(x);
        let mut best = f64::NEG_INFINITY;
        let mut best_a = feas[0];
        for &a in feas {
            let val = dp.aggregator(x, a, v);
            if val.is_nan() {
                return Err(DpError::NumericalDomain { state: x, action: a });
            }
            if val > best {
                best = val;
                best_a = a;
            }
        }
        *vo = best;
        *ao = best_a;
        Ok(())
    };
    if parallel && space.n_states() >= PAR_MIN_STATES {
        out_v
            .par_iter_mut()
            .zip(out_a.par_iter_mut())
            .enumerate()
            .try_for_each(|(x, (vo, ao))| state_sweep(x, vo, ao))
    } else {
        out_v
            .iter_mut()
            .zip(out_a.iter_mut())
            .enumerate()
            .try_for_each(|(x, (vo, ao))| state_sweep(x, vo, ao))
    }
}

/// `(T v)(x) = max_{a in Gamma(x)} H(x, a, v)`, with the argmax policy.
pub fn bellman_t(dp: &dyn DynamicProgram, v: &ValueFn) -> Result<(ValueFn, Policy)> {
    check_v_len(dp, v)?;
    let n = dp.space().n_states();
    let mut out_v = vec![0.0; n];
    let mut out_a = vec![0usize; n];
    bellman_t_into(dp, v.as_slice(), &mut out_v, &mut out_a, false)?;
    Ok((ValueFn(out_v), Policy(out_a)))
}

/// M with a NaN guard, reporting the offending feasible pair.
fn apply_m_checked_into(
    dp: &dyn DynamicProgram,
    h: &HFn,
    out_v: &mut [f64],
    out_a: &mut [usize],
    parallel: bool,
) -> Result<()> {
    let space = dp.space();
    let state_sweep = |x: usize, vo: &mut f64, ao: &mut usize| -> Result<()> {
        let feas = space.feasible(x);
        let off = space.pair_offset(x);
        let mut best = f64::NEG_INFINITY;
        let mut best_a = feas[0];
        for (j, &a) in feas.iter().enumerate() {
            let val = h.values[off + j];
            if val.is_nan() {
                return Err(DpError::NumericalDomain { state: x, action: a });
            }
            if val > best {
                best = val;
                best_a = a;
            }
        }
        *vo = best;
        *ao = best_a;
        Ok(())
    };
    if parallel && space.n_states() >= PAR_MIN_STATES {
        out_v
            .par_iter_mut()
            .zip(out_a.par_iter_mut())
            .enumerate()
            .try_for_each(|(x, (vo, ao))| state_sweep(x, vo, ao))
    } else {
        out_v
            .iter_mut()
            .zip(out_a.iter_mut())
            .enumerate()
            .try_for_each(|(x, (vo, ao))| state_sweep(x, vo, ao))
    }
}

/// Scratch space for refactored sweeps, so solvers do not reallocate the
/// intermediate pair and state tables every iteration.
pub struct SweepBuffers {
    pub h: HFn,
    pub v: Vec<f64>,
    pub pol: Vec<usize>,
}

impl SweepBuffers {
    pub fn new(dp: &dyn DynamicProgram) -> Self {
        Self {
            h: HFn::zeros(dp.space()),
            v: vec![0.0; dp.space().n_states()],
            pol: vec![0usize; dp.space().n_states()],
        }
    }
}

/// One refactored Bellman sweep `S g = W0 (M (W1 g))` into `out`, leaving the
/// intermediate pair table, state table and argmax policy in `buf`.
pub fn refactored_s_into(
    dp: &dyn DynamicProgram,
    pf: &dyn PlanFactorization,
    g: &[f64],
    out: &mut [f64],
    buf: &mut SweepBuffers,
    parallel: bool,
) -> Result<()> {
    pf.w1(g, &mut buf.h);
    apply_m_checked_into(dp, &buf.h, &mut buf.v, &mut buf.pol, parallel)?;
    pf.w0(&buf.v, out);
    Ok(())
}

/// `S g = W0 M W1 g`. The intermediate maximization is computed explicitly,
/// so the argmax policy of the sweep is returned alongside the image.
pub fn refactored_s(
    dp: &dyn DynamicProgram,
    pf: &dyn PlanFactorization,
    g: &RefactoredFn,
) -> Result<(RefactoredFn, Policy)> {
    check_g_len(pf, g)?;
    let mut buf = SweepBuffers::new(dp);
    let mut out = vec![0.0; pf.reduced_len()];
    refactored_s_into(dp, pf, g.as_slice(), &mut out, &mut buf, false)?;
    Ok((RefactoredFn(out), Policy(buf.pol)))
}

/// One policy sweep `(T_sigma v)(x) = H(x, sigma(x), v)` into `out_v`.
pub fn policy_t_sigma_into(
    dp: &dyn DynamicProgram,
    sigma: &Policy,
    v: &[f64],
    out_v: &mut [f64],
    parallel: bool,
) -> Result<()> {
    let state_sweep = |x: usize, vo: &mut f64| -> Result<()> {
        let a = sigma.action(x);
        let val = dp.aggregator(x, a, v);
        if val.is_nan() {
            return Err(DpError::NumericalDomain { state: x, action: a });
        }
        *vo = val;
        Ok(())
    };
    if parallel && dp.space().n_states() >= PAR_MIN_STATES {
        out_v
            .par_iter_mut()
            .enumerate()
            .try_for_each(|(x, vo)| state_sweep(x, vo))
    } else {
        out_v
            .iter_mut()
            .enumerate()
            .try_for_each(|(x, vo)| state_sweep(x, vo))
    }
}

/// `(T_sigma v)(x) = H(x, sigma(x), v)`.
pub fn policy_t_sigma(dp: &dyn DynamicProgram, sigma: &Policy, v: &ValueFn) -> Result<ValueFn> {
    check_v_len(dp, v)?;
    dp.space().check_policy(&sigma.0)?;
    let mut out = vec![0.0; dp.space().n_states()];
    policy_t_sigma_into(dp, sigma, v.as_slice(), &mut out, false)?;
    Ok(ValueFn(out))
}

/// One refactored policy sweep `S_sigma g = W0 (M_sigma (W1 g))` into `out`.
pub fn policy_s_sigma_into(
    dp: &dyn DynamicProgram,
    pf: &dyn PlanFactorization,
    sigma: &Policy,
    g: &[f64],
    out: &mut [f64],
    buf: &mut SweepBuffers,
) -> Result<()> {
    let space = dp.space();
    pf.w1(g, &mut buf.h);
    for x in 0..space.n_states() {
        let a = sigma.action(x);
        let pair = space
            .pair_index(x, a)
            .ok_or(DpError::InfeasiblePolicy { state: x, action: a })?;
        let val = buf.h.values[pair];
        if val.is_nan() {
            return Err(DpError::NumericalDomain { state: x, action: a });
        }
        buf.v[x] = val;
    }
    pf.w0(&buf.v, out);
    Ok(())
}

/// `S_sigma g = W0 M_sigma W1 g`.
pub fn policy_s_sigma(
    dp: &dyn DynamicProgram,
    pf: &dyn PlanFactorization,
    sigma: &Policy,
    g: &RefactoredFn,
) -> Result<RefactoredFn> {
    check_g_len(pf, g)?;
    dp.space().check_policy(&sigma.0)?;
    let mut buf = SweepBuffers::new(dp);
    let mut out = vec![0.0; pf.reduced_len()];
    policy_s_sigma_into(dp, pf, sigma, g.as_slice(), &mut out, &mut buf)?;
    Ok(RefactoredFn(out))
}

/// The v-greedy policy: argmax of `H(x, a, v)` over the feasible set, ties to
/// the lowest action index. Identical to the argmax exposed by [`bellman_t`].
pub fn greedy_from_v(dp: &dyn DynamicProgram, v: &ValueFn) -> Result<Policy> {
    bellman_t(dp, v).map(|(_, pol)| pol)
}

/// The g-greedy policy: argmax of `(W1 g)(x, a)`, ties to the lowest action
/// index. When `g = W0 v` this coincides with the v-greedy policy of `v`.
pub fn greedy_from_g(
    dp: &dyn DynamicProgram,
    pf: &dyn PlanFactorization,
    g: &RefactoredFn,
) -> Result<Policy> {
    check_g_len(pf, g)?;
    let mut buf = SweepBuffers::new(dp);
    pf.w1(g.as_slice(), &mut buf.h);
    let mut out_v = vec![0.0; dp.space().n_states()];
    let mut out_a = vec![0usize; dp.space().n_states()];
    apply_m_checked_into(dp, &buf.h, &mut out_v, &mut out_a, false)?;
    Ok(Policy(out_a))
}

/// `W0 v`: lifts a state-indexed table onto the reduced domain.
pub fn lift_v_to_g(pf: &dyn PlanFactorization, v: &ValueFn) -> RefactoredFn {
    let mut out = vec![0.0; pf.reduced_len()];
    pf.w0(v.as_slice(), &mut out);
    RefactoredFn(out)
}

/// `M W1 g`: lowers a reduced table back to the state space. At a fixed point
/// pair `(v, g)` of `(T, S)` the lift and lower maps invert each other.
pub fn lower_g_to_v(
    dp: &dyn DynamicProgram,
    pf: &dyn PlanFactorization,
    g: &RefactoredFn,
) -> Result<ValueFn> {
    check_g_len(pf, g)?;
    let mut buf = SweepBuffers::new(dp);
    pf.w1(g.as_slice(), &mut buf.h);
    let mut out_v = vec![0.0; dp.space().n_states()];
    let mut out_a = vec![0usize; dp.space().n_states()];
    apply_m_checked_into(dp, &buf.h, &mut out_v, &mut out_a, false)?;
    Ok(ValueFn(out_v))
}
