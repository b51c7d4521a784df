//! Shared helpers for the integration suites: reproducible random models,
//! factorization-validity sweeps and conjugacy checks used across every
//! shipped model/factorization pair.

#![allow(dead_code)]

use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dp_core::models::FiniteMdp;
use dp_core::operators::{
    apply_m, apply_m_sigma, bellman_t, lift_v_to_g, policy_s_sigma, policy_t_sigma, refactored_s,
};
use dp_core::{
    DynamicProgram, HFn, PlanFactorization, Policy, RefactoredFn, StateActionSpace, ValueFn,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Smooth two-dimensional stopping model whose y transition stays strictly
/// inside the grid, so the fitted standard and refactored paths see the same
/// boundary behavior.
pub fn smooth_mc_family(l: usize, k: usize, beta: f64) -> dp_core::numerics::McStoppingModel {
    use dp_core::numerics::{Grid1D, McStoppingModel};
    McStoppingModel {
        y_grid: Grid1D::equidistant(0.0, 3.0, l).unwrap(),
        z_grid: Grid1D::equidistant(-3.0, 3.0, k).unwrap(),
        beta,
        terminal: Box::new(|y, _| y),
        flow: Box::new(|_, _| 0.55),
        next_y: Box::new(|z, u| 1.5 + 1.2 * (0.5 * z + 0.35 * u[0]).tanh()),
        next_z: Box::new(|z, u| 0.75 * z + 0.25 * u[1]),
    }
}

pub fn random_mdp(
    n_states: usize,
    n_actions: usize,
    beta: f64,
    restrict: bool,
    rng: &mut ChaCha8Rng,
) -> Arc<FiniteMdp> {
    Arc::new(FiniteMdp::random(n_states, n_actions, beta, restrict, rng))
}

pub fn random_v(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> ValueFn {
    ValueFn((0..n).map(|_| rng.gen_range(-scale..scale)).collect())
}

pub fn random_policy(space: &StateActionSpace, rng: &mut ChaCha8Rng) -> Policy {
    Policy(
        (0..space.n_states())
            .map(|x| {
                let feas = space.feasible(x);
                feas[rng.gen_range(0..feas.len())]
            })
            .collect(),
    )
}

/// Largest relative factorization defect `|W1 W0 v - H(., ., v)|` over all
/// feasible pairs and `n_samples` random tables.
pub fn validity_defect(
    dp: &dyn DynamicProgram,
    pf: &dyn PlanFactorization,
    n_samples: usize,
    scale: f64,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let n = dp.space().n_states();
    let mut g = vec![0.0; pf.reduced_len()];
    let mut h = HFn::zeros(dp.space());
    let mut worst: f64 = 0.0;
    for _ in 0..n_samples {
        let v = random_v(n, scale, rng);
        pf.w0(v.as_slice(), &mut g);
        pf.w1(&g, &mut h);
        for (pair, x, a) in dp.space().pairs() {
            let direct = dp.aggregator(x, a, v.as_slice());
            let defect = (h.values[pair] - direct).abs() / direct.abs().max(1.0);
            worst = worst.max(defect);
        }
    }
    worst
}

/// Largest absolute defect of the iteration identities
/// `S^n (W0 v0) = W0 T^{n-1} M W1 (W0 v0)` and
/// `T^n v0 = M W1 S^{n-1} (W0 v0)` over the given sweep lengths, scaled by
/// the magnitude of the compared tables.
pub fn conjugacy_defect(
    dp: &dyn DynamicProgram,
    pf: &dyn PlanFactorization,
    v0: &ValueFn,
    ns: &[usize],
) -> f64 {
    let g0 = lift_v_to_g(pf, v0);
    let mut worst: f64 = 0.0;
    for &n in ns {
        // left: S^n g0
        let mut g = RefactoredFn(g0.0.clone());
        for _ in 0..n {
            g = refactored_s(dp, pf, &g).unwrap().0;
        }
        // right: W0 T^{n-1} (M W1 g0)
        let mut h = HFn::zeros(dp.space());
        pf.w1(&g0.0, &mut h);
        let (mut v, _) = apply_m(dp, &h);
        for _ in 0..n - 1 {
            v = bellman_t(dp, &v).unwrap().0;
        }
        let lifted = lift_v_to_g(pf, &v);
        worst = worst.max(dp_core::sup_norm_diff(&g.0, &lifted.0));

        // left: T^n v0
        let mut tv = v0.clone();
        for _ in 0..n {
            tv = bellman_t(dp, &tv).unwrap().0;
        }
        // right: M W1 S^{n-1} g0
        let mut g = RefactoredFn(g0.0.clone());
        for _ in 0..n - 1 {
            g = refactored_s(dp, pf, &g).unwrap().0;
        }
        let mut h = HFn::zeros(dp.space());
        pf.w1(&g.0, &mut h);
        let (mv, _) = apply_m(dp, &h);
        worst = worst.max(dp_core::sup_norm_diff(&tv.0, &mv.0));
    }
    worst
}

/// The policy-operator analogue of [`conjugacy_defect`]:
/// `S_sigma^n (W0 v0) = W0 T_sigma^{n-1} M_sigma W1 (W0 v0)` and
/// `T_sigma^n v0 = M_sigma W1 S_sigma^{n-1} (W0 v0)`.
pub fn sigma_conjugacy_defect(
    dp: &dyn DynamicProgram,
    pf: &dyn PlanFactorization,
    sigma: &Policy,
    v0: &ValueFn,
    ns: &[usize],
) -> f64 {
    let g0 = lift_v_to_g(pf, v0);
    let mut worst: f64 = 0.0;
    for &n in ns {
        let mut g = RefactoredFn(g0.0.clone());
        for _ in 0..n {
            g = policy_s_sigma(dp, pf, sigma, &g).unwrap();
        }
        let mut h = HFn::zeros(dp.space());
        pf.w1(&g0.0, &mut h);
        let (mut v, _) = (apply_m_sigma(dp, &h, sigma).unwrap(), ());
        for _ in 0..n - 1 {
            v = policy_t_sigma(dp, sigma, &v).unwrap();
        }
        let lifted = lift_v_to_g(pf, &v);
        worst = worst.max(dp_core::sup_norm_diff(&g.0, &lifted.0));

        let mut tv = v0.clone();
        for _ in 0..n {
            tv = policy_t_sigma(dp, sigma, &tv).unwrap();
        }
        let mut g = RefactoredFn(g0.0.clone());
        for _ in 0..n - 1 {
            g = policy_s_sigma(dp, pf, sigma, &g).unwrap();
        }
        let mut h = HFn::zeros(dp.space());
        pf.w1(&g.0, &mut h);
        let mv = apply_m_sigma(dp, &h, sigma).unwrap();
        worst = worst.max(dp_core::sup_norm_diff(&tv.0, &mv.0));
    }
    worst
}

/// Sup-norm difference scaled by the larger table magnitude (floored at 1).
pub fn scaled_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = a
        .iter()
        .chain(b)
        .map(|x| x.abs())
        .fold(1.0f64, f64::max);
    dp_core::sup_norm_diff(a, b) / scale
}

/// Checks declared monotonicity of `(W0, W1)` on `n_samples` ordered pairs;
/// returns the worst violation (zero when monotone on the sample).
pub fn monotonicity_violation(
    dp: &dyn DynamicProgram,
    pf: &dyn PlanFactorization,
    n_samples: usize,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let n = dp.space().n_states();
    let m = pf.reduced_len();
    let mut worst: f64 = 0.0;
    let mut g_lo = vec![0.0; m];
    let mut g_hi = vec![0.0; m];
    let mut h_lo = HFn::zeros(dp.space());
    let mut h_hi = HFn::zeros(dp.space());
    for _ in 0..n_samples {
        let lo = random_v(n, 2.0, rng);
        let hi = ValueFn(
            lo.0.iter()
                .map(|v| v + rng.gen_range(0.0..1.5))
                .collect(),
        );
        pf.w0(lo.as_slice(), &mut g_lo);
        pf.w0(hi.as_slice(), &mut g_hi);
        for (a, b) in g_lo.iter().zip(&g_hi) {
            worst = worst.max(a - b);
        }
        // ordered pair on the reduced domain
        let base: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..2.0)).collect();
        let upper: Vec<f64> = base.iter().map(|v| v + rng.gen_range(0.0..1.0)).collect();
        pf.w1(&base, &mut h_lo);
        pf.w1(&upper, &mut h_hi);
        for (a, b) in h_lo.values.iter().zip(&h_hi.values) {
            worst = worst.max(a - b);
        }
    }
    worst
}
