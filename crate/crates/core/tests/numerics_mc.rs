//! Fitted-operator invariants: the two Monte Carlo fixed points agree once
//! one is lowered to the common grid, and per-sweep costs scale as the
//! operator shapes dictate (quadratic vs linear in the y-grid for the
//! finite-state sweeps; flat vs roughly linear for the fitted ones).

use dp_core::bench::{
    run_scaling_cs_refactored, run_scaling_cs_standard, run_scaling_fs, scaling_fit, SolverKind,
};
use dp_core::numerics::mc::{
    mc_lower_to_full, solve_mc_refactored, solve_mc_standard, ShockDraws,
};
use dp_core::solvers::SolveConfig;
use dp_core::sup_norm_diff;

mod common;
use common::smooth_mc_family as smooth_family;

// Everything shares one test function: the cost measurements must not
// contend with a sibling test thread for the two cores.
#[test]
fn fitted_operator_suite() {
    fitted_fixed_points_agree_through_the_lowering_map();
    finite_state_sweep_costs_double_as_predicted();
    fitted_sweep_costs_split_between_flat_and_growing();
}

fn fitted_fixed_points_agree_through_the_lowering_map() {
    let model = smooth_family(24, 24, 0.88);
    let draws = ShockDraws::standard_normal(2_000, 0).unwrap();
    let cfg = SolveConfig::default();
    let (g_hat, rep_s) = solve_mc_refactored(&model, &draws, &cfg).unwrap();
    let (v_hat, rep_t) = solve_mc_standard(&model, &draws, &cfg).unwrap();
    assert!(rep_s.converged && rep_t.converged);
    let lowered = mc_lower_to_full(&model, &g_hat).unwrap();
    let defect = sup_norm_diff(&lowered, &v_hat);
    assert!(defect < 5e-3, "fitted fixed points differ by {defect:.2e}");
}

fn finite_state_sweep_costs_double_as_predicted() {
    // Doubling the y grid should multiply the standard per-iteration cost by
    // about 4 and the refactored one by about 2, within a factor 1.5 band.
    // The refactored sweep runs at larger sizes with repetitions: its
    // per-iteration cost is microseconds and needs the volume for a stable
    // median.
    let vfi = run_scaling_fs(&[40, 80, 160], 16, 0.93, SolverKind::Vfi, 3).unwrap();
    for w in vfi.windows(2) {
        let factor = w[1].per_iter_time / w[0].per_iter_time;
        assert!(
            (4.0 / 1.5..=4.0 * 1.5).contains(&factor),
            "standard sweep doubling factor {factor:.2}"
        );
    }
    let rvfi = run_scaling_fs(&[160, 320, 640], 32, 0.93, SolverKind::Rvfi, 5).unwrap();
    for w in rvfi.windows(2) {
        let factor = w[1].per_iter_time / w[0].per_iter_time;
        assert!(
            (2.0 / 1.5..=2.0 * 1.5).contains(&factor),
            "refactored sweep doubling factor {factor:.2}"
        );
    }
}

fn fitted_sweep_costs_split_between_flat_and_growing() {
    let ls = [50usize, 100, 200, 400];
    // the refactored fitted sweep never touches the y grid
    let flat = run_scaling_cs_refactored(&ls, 16, 0.9, 10_000, 0, 10, 7).unwrap();
    let lo = flat.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi = flat.iter().map(|p| p.1).fold(0.0f64, f64::max);
    assert!(
        hi / lo - 1.0 < 0.2,
        "refactored fitted sweep cost varied by {:.1}%",
        100.0 * (hi / lo - 1.0)
    );
    // the standard fitted sweep grows about linearly (times a log factor)
    let growing = run_scaling_cs_standard(&ls, 16, 0.9, 200, 0, 4, 3).unwrap();
    let points: Vec<(f64, f64)> = growing.iter().map(|&(l, t)| (l as f64, t)).collect();
    let (slope, _) = scaling_fit(&points).unwrap();
    assert!(
        (0.6..=1.6).contains(&slope),
        "standard fitted sweep slope {slope:.2}"
    );
}
