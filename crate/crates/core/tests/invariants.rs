//! Cross-model invariant suite: factorization validity, iteration
//! conjugacy, dominance, monotonicity, greedy consistency, fixed-point
//! correspondence and the optimistic-policy-iteration equivalences, checked
//! over every shipped model family.

mod common;

use std::sync::Arc;

use common::*;
use rand::Rng;

use dp_core::models::{
    bankruptcy::{build_bankruptcy, BankruptcyGrids, BankruptcyParams},
    counterexample::build_counterexample,
    expected_value_factorization, identity_factorization, nonmonotone_factorization,
    qfactor_factorization,
    risk_sensitive::{build_risk_sensitive, RiskSensitiveModel},
    robust::{build_robust, tracking_instance},
    stopping::{build_stopping, job_search, synthetic_stopping},
};
use dp_core::operators::{
    apply_m, apply_m_sigma, greedy_from_g, greedy_from_v, lift_v_to_g, lower_g_to_v,
};
use dp_core::solvers::{
    brute_force_oracle, opi_traced, policy_value, refactored_opi_traced, refactored_policy_value,
    rvfi, vfi, SolveConfig,
};
use dp_core::{sup_norm_diff, DynamicProgram, HFn, PlanFactorization, RefactoredFn, ValueFn};

const VALIDITY_TOL: f64 = 1e-12;
const CONJUGACY_TOL: f64 = 1e-12;

/// Every shipped (model, factorization) pair, at small grid sizes.
fn shipped_pairs() -> Vec<(String, Arc<dyn DynamicProgram>, Arc<dyn PlanFactorization>)> {
    let mut rng = rng(2024);
    let mut out: Vec<(String, Arc<dyn DynamicProgram>, Arc<dyn PlanFactorization>)> = Vec::new();

    let mdp = random_mdp(5, 3, 0.9, true, &mut rng);
    out.push((
        "mdp/expected_value".into(),
        mdp.clone(),
        Arc::new(expected_value_factorization(mdp.clone())),
    ));
    out.push((
        "mdp/qfactor".into(),
        mdp.clone(),
        Arc::new(qfactor_factorization(mdp.clone())),
    ));
    out.push((
        "mdp/identity".into(),
        mdp.clone(),
        Arc::new(identity_factorization(mdp.clone(), true)),
    ));

    let (bk, bk_pf) =
        build_bankruptcy(BankruptcyParams::default(), BankruptcyGrids::square(4)).unwrap();
    out.push(("bankruptcy/expected_value".into(), bk, Arc::new(bk_pf)));

    let (stop, stop_pf) = build_stopping(Arc::new(synthetic_stopping(6, 4, 0.9).unwrap()));
    out.push(("stopping/continuation".into(), stop, Arc::new(stop_pf)));

    let (js, js_pf) = build_stopping(Arc::new(job_search(4, 3, 4, 0.9).unwrap()));
    out.push(("job_search/continuation".into(), js, Arc::new(js_pf)));

    let rs = Arc::new(RiskSensitiveModel::random(4, 3, 0.9, 1.2, &mut rng));
    let (rs, rs_pf) = build_risk_sensitive(rs);
    out.push(("risk_sensitive/monotone".into(), rs.clone(), Arc::new(rs_pf)));
    out.push((
        "risk_sensitive/nonmonotone".into(),
        rs.clone(),
        Arc::new(nonmonotone_factorization(rs)),
    ));

    let (rb, rb_pf) = build_robust(tracking_instance(5, 4, 2.0, 0.9).unwrap());
    out.push(("robust/shock_integrating".into(), rb, Arc::new(rb_pf)));

    let ce = Arc::new(build_counterexample(0.9, 1.0).unwrap());
    let ce_pf = ce.factorization();
    out.push(("counterexample/nonmonotone".into(), ce, Arc::new(ce_pf)));

    out
}

#[test]
fn factorization_validity_holds_for_every_shipped_pair() {
    let mut r = rng(100);
    for (name, dp, pf) in shipped_pairs() {
        let defect = validity_defect(dp.as_ref(), pf.as_ref(), 20, 3.0, &mut r);
        assert!(
            defect < VALIDITY_TOL,
            "{name}: validity defect {defect:.3e}"
        );
    }
}

#[test]
fn iteration_conjugacy_holds_for_every_shipped_pair() {
    let mut r = rng(101);
    for (name, dp, pf) in shipped_pairs() {
        let v0 = random_v(dp.space().n_states(), 2.0, &mut r);
        let defect = conjugacy_defect(dp.as_ref(), pf.as_ref(), &v0, &[1, 2, 5]);
        assert!(
            defect < CONJUGACY_TOL,
            "{name}: conjugacy defect {defect:.3e}"
        );
    }
}

#[test]
fn policy_operator_conjugacy_holds_for_sampled_policies() {
    let mut r = rng(102);
    for (name, dp, pf) in shipped_pairs() {
        let v0 = random_v(dp.space().n_states(), 2.0, &mut r);
        for _ in 0..5 {
            let sigma = random_policy(dp.space(), &mut r);
            let defect = sigma_conjugacy_defect(dp.as_ref(), pf.as_ref(), &sigma, &v0, &[1, 2, 5]);
            assert!(
                defect < CONJUGACY_TOL,
                "{name}: sigma-conjugacy defect {defect:.3e}"
            );
        }
    }
}

#[test]
fn maximization_dominates_every_policy_selection() {
    let mut r = rng(103);
    for (name, dp, _pf) in shipped_pairs() {
        for _ in 0..10 {
            let mut h = HFn::zeros(dp.space());
            for v in h.values.iter_mut() {
                *v = r.gen_range(-5.0..5.0);
            }
            let (vm, _) = apply_m(dp.as_ref(), &h);
            let sigma = random_policy(dp.space(), &mut r);
            let vs = apply_m_sigma(dp.as_ref(), &h, &sigma).unwrap();
            for (a, b) in vm.0.iter().zip(&vs.0) {
                assert!(a >= b, "{name}: M fell below M_sigma");
            }
        }
    }
}

#[test]
fn declared_monotonicity_is_honored_and_its_absence_is_real() {
    let mut r = rng(104);
    for (name, dp, pf) in shipped_pairs() {
        let violation = monotonicity_violation(dp.as_ref(), pf.as_ref(), 20, &mut r);
        if pf.is_monotone() {
            assert!(
                violation <= 1e-12,
                "{name} declared monotone but violates by {violation:.3e}"
            );
        }
    }
    // the non-monotone factorizations fail on an explicit witness pair
    let ce = Arc::new(build_counterexample(0.9, 1.0).unwrap());
    let pf = ce.factorization();
    let lo = ValueFn(vec![0.0, 0.0]);
    let hi = ValueFn(vec![1.0, 1.0]);
    let g_lo = lift_v_to_g(&pf, &lo);
    let g_hi = lift_v_to_g(&pf, &hi);
    assert!(
        g_lo.0.iter().zip(&g_hi.0).any(|(a, b)| a > b),
        "counterexample W0 unexpectedly preserved the order"
    );
    let rs = Arc::new(RiskSensitiveModel::random(3, 2, 0.9, 1.0, &mut r));
    let nm = nonmonotone_factorization(rs);
    let g_lo = lift_v_to_g(&nm, &ValueFn(vec![0.0; 3]));
    let g_hi = lift_v_to_g(&nm, &ValueFn(vec![1.0; 3]));
    assert!(g_lo.0.iter().zip(&g_hi.0).any(|(a, b)| a > b));
}

#[test]
fn greedy_policies_agree_across_the_two_paths() {
    let mut r = rng(105);
    for (name, dp, pf) in shipped_pairs() {
        for _ in 0..10 {
            let v = random_v(dp.space().n_states(), 2.0, &mut r);
            let g = lift_v_to_g(pf.as_ref(), &v);
            let via_v = greedy_from_v(dp.as_ref(), &v).unwrap();
            let via_g = greedy_from_g(dp.as_ref(), pf.as_ref(), &g).unwrap();
            assert_eq!(via_v, via_g, "{name}: greedy paths disagree");
        }
    }
}

#[test]
fn fixed_points_correspond_across_the_two_paths() {
    let mut r = rng(106);
    let cfg = SolveConfig::default();
    for _ in 0..10 {
        let mdp = random_mdp(5, 3, 0.9, true, &mut r);
        let pf = expected_value_factorization(mdp.clone());
        let v0 = ValueFn::zeros(5);
        let g0 = lift_v_to_g(&pf, &v0);
        let (v_bar, pol_v, rep_v) = vfi(mdp.as_ref(), &v0, &cfg).unwrap();
        let (g_bar, pol_g, rep_g) = rvfi(mdp.as_ref(), &pf, &g0, &cfg).unwrap();
        assert!(rep_v.converged && rep_g.converged);
        assert!(sup_norm_diff(&lift_v_to_g(&pf, &v_bar).0, &g_bar.0) < 10.0 * cfg.tol);
        let lowered = lower_g_to_v(mdp.as_ref(), &pf, &g_bar).unwrap();
        assert!(sup_norm_diff(&lowered.0, &v_bar.0) < 10.0 * cfg.tol);
        assert_eq!(pol_v, pol_g);
        // matched starts keep the sweep counts within one of each other
        assert!(
            (rep_v.iterations as i64 - rep_g.iterations as i64).abs() <= 1,
            "iteration counts diverged: {} vs {}",
            rep_v.iterations,
            rep_g.iterations
        );
    }
}

#[test]
fn oracle_certifies_optimality_of_both_solvers() {
    let mut r = rng(107);
    let cfg = SolveConfig::default();
    for _ in 0..10 {
        let mdp = random_mdp(4, 3, 0.9, true, &mut r);
        let pf = expected_value_factorization(mdp.clone());
        let (v_star, g_star) = brute_force_oracle(mdp.as_ref(), &pf, &cfg).unwrap();
        let n = mdp.space().n_states();
        let (v_bar, _, _) = vfi(mdp.as_ref(), &ValueFn::zeros(n), &cfg).unwrap();
        let g0 = lift_v_to_g(&pf, &ValueFn::zeros(n));
        let (g_bar, g_pol, _) = rvfi(mdp.as_ref(), &pf, &g0, &cfg).unwrap();
        assert!(sup_norm_diff(&v_bar.0, &v_star.0) < 10.0 * cfg.tol);
        assert!(sup_norm_diff(&g_bar.0, &g_star.0) < 10.0 * cfg.tol);
        // any g*-greedy policy is optimal: its value attains v*
        let (v_sigma, _) = policy_value(mdp.as_ref(), &g_pol, &cfg).unwrap();
        assert!(sup_norm_diff(&v_sigma.0, &v_star.0) < 10.0 * cfg.tol);
    }
}

#[test]
fn optimistic_policy_iteration_generates_identical_greedy_sequences() {
    let mut r = rng(108);
    for m in [1usize, 3, 10] {
        for _ in 0..5 {
            let mdp = random_mdp(5, 3, 0.9, true, &mut r);
            let pf = expected_value_factorization(mdp.clone());
            let cfg = SolveConfig {
                m_steps: vec![m],
                ..SolveConfig::default()
            };
            let v0 = random_v(5, 1.0, &mut r);
            let g0 = lift_v_to_g(&pf, &v0);
            let (_, _, _, tr_v) = opi_traced(mdp.as_ref(), &v0, &cfg).unwrap();
            let (_, _, _, tr_g) =
                refactored_opi_traced(mdp.as_ref(), &pf, &g0, &cfg).unwrap();
            assert_eq!(
                tr_v.policies.len(),
                tr_g.policies.len(),
                "m={m}: outer iteration counts differ"
            );
            for (k, (a, b)) in tr_v.policies.iter().zip(&tr_g.policies).enumerate() {
                assert_eq!(a, b, "m={m}: greedy policies differ at step {k}");
            }
            // and the iterates stay linked by the lift throughout
            for (vk, gk) in tr_v.iterates.iter().zip(&tr_g.iterates) {
                let lifted = lift_v_to_g(&pf, &ValueFn(vk.clone()));
                assert!(sup_norm_diff(&lifted.0, gk) < 1e-10);
            }
        }
    }
}

#[test]
fn refactored_opi_is_monotone_from_a_certified_start_and_reaches_the_oracle() {
    let mut r = rng(109);
    for _ in 0..5 {
        let mdp = random_mdp(4, 3, 0.9, false, &mut r);
        let pf = expected_value_factorization(mdp.clone());
        let cfg = SolveConfig {
            m_steps: vec![5],
            ..SolveConfig::default()
        };
        let m_low = mdp.reward_lower_bound().unwrap();
        let v0 = ValueFn::constant(4, m_low / (1.0 - 0.9));
        let g0 = lift_v_to_g(&pf, &v0);
        // certify g0 <= S g0
        let (sg0, _) = dp_core::operators::refactored_s(mdp.as_ref(), &pf, &g0).unwrap();
        assert!(g0.0.iter().zip(&sg0.0).all(|(a, b)| a <= b));
        let (g_final, _, rep, trace) =
            refactored_opi_traced(mdp.as_ref(), &pf, &g0, &cfg).unwrap();
        assert!(rep.converged);
        for w in trace.iterates.windows(2) {
            assert!(
                w[0].iter().zip(&w[1]).all(|(a, b)| *a <= b + 1e-12),
                "g_k sequence lost monotonicity"
            );
        }
        let (_, g_star) = brute_force_oracle(mdp.as_ref(), &pf, &cfg).unwrap();
        assert!(sup_norm_diff(&g_final.0, &g_star.0) < 10.0 * cfg.tol);
    }
}

#[test]
fn sigma_value_functions_lift_correctly_on_every_shipped_model() {
    let mut r = rng(110);
    let cfg = SolveConfig {
        tol: 1e-8,
        ..SolveConfig::default()
    };
    for (name, dp, pf) in shipped_pairs() {
        if dp.discount() >= 1.0 {
            continue;
        }
        let sigma = random_policy(dp.space(), &mut r);
        let (v_sigma, _) = policy_value(dp.as_ref(), &sigma, &cfg).unwrap();
        let (g_sigma, rep) = refactored_policy_value(dp.as_ref(), pf.as_ref(), &sigma, &cfg)
            .unwrap();
        assert!(rep.converged, "{name}: refactored evaluation stalled");
        let lifted = lift_v_to_g(pf.as_ref(), &v_sigma);
        assert!(
            scaled_diff(&g_sigma.0, &lifted.0) < 1e-6,
            "{name}: g_sigma is not the lift of v_sigma"
        );
    }
}

#[test]
fn stopping_split_reduces_dimension_without_changing_the_fixed_point() {
    let cfg = SolveConfig::default();
    let (model, pf) = build_stopping(Arc::new(job_search(5, 4, 6, 0.9).unwrap()));
    let n = model.space().n_states();
    assert_eq!(pf.reduced_len(), 6);
    let v0 = ValueFn::zeros(n);
    let g0 = lift_v_to_g(&pf, &v0);
    let (v_bar, pol_v, _) = vfi(model.as_ref(), &v0, &cfg).unwrap();
    let (g_bar, pol_g, _) = rvfi(model.as_ref(), &pf, &g0, &cfg).unwrap();
    let lowered = lower_g_to_v(model.as_ref(), &pf, &g_bar).unwrap();
    assert!(sup_norm_diff(&lowered.0, &v_bar.0) < 10.0 * cfg.tol);
    assert_eq!(pol_v, pol_g);
}

#[test]
fn counterexample_regimes_split_exactly_as_analyzed() {
    // beta < 1: T fixes v*, S moves g*; beta > 1: S fixes g*, T moves v*.
    let below = Arc::new(build_counterexample(0.9, 1.0).unwrap());
    let pf = below.factorization();
    let (tv, _) = dp_core::operators::bellman_t(below.as_ref(), &below.v_star()).unwrap();
    assert!(sup_norm_diff(&tv.0, &below.v_star().0) < 1e-12);
    let (sg, _) =
        dp_core::operators::refactored_s(below.as_ref(), &pf, &below.g_star()).unwrap();
    assert!(sup_norm_diff(&sg.0, &below.g_star().0) > 1e-6);

    let above = Arc::new(build_counterexample(1.1, 1.0).unwrap());
    let pf = above.factorization();
    let (sg, _) =
        dp_core::operators::refactored_s(above.as_ref(), &pf, &above.g_star()).unwrap();
    assert!(sup_norm_diff(&sg.0, &above.g_star().0) < 1e-10);
    let (tv, _) = dp_core::operators::bellman_t(above.as_ref(), &above.v_star()).unwrap();
    assert!(sup_norm_diff(&tv.0, &above.v_star().0) > 0.05);
}

#[test]
fn rvfi_identity_matches_vfi_on_a_nontrivial_model() {
    // identity factorization: S and T literally coincide
    let (model, _) = build_stopping(Arc::new(synthetic_stopping(5, 4, 0.9).unwrap()));
    let pf = identity_factorization(model.clone(), true);
    let cfg = SolveConfig::default();
    let n = model.space().n_states();
    let (v_bar, pol_v, rep_v) = vfi(model.as_ref(), &ValueFn::zeros(n), &cfg).unwrap();
    let (g_bar, pol_g, rep_g) =
        rvfi(model.as_ref(), &pf, &RefactoredFn(vec![0.0; n]), &cfg).unwrap();
    assert_eq!(v_bar.0, g_bar.0);
    assert_eq!(pol_v, pol_g);
    assert_eq!(rep_v.iterations, rep_g.iterations);
}
