use std::f64::consts::TAU;

use fiberlift::lifting::{lift_measure, LiftOptions};
use fiberlift::rng::{stream, Rng};
use fiberlift::stats::*;
use fiberlift::systems::{estimate_shrinking, zoo, ExpandingK};
use fiberlift::thermo::Potential;
use fiberlift::transfer::{build_ulam, invariant_density, sample_grid, Construction};
use fiberlift::{EmpiricalMeasure, ModulusClass, Point};
use proptest::prelude::*;

#[test]
fn doubling_covariances_match_closed_form() {
    let d = zoo::doubling();
    let tr = correlations(&d, &|p| p.y, &|p| p.y, 20, 1_000_000, 7).unwrap();
    for n in 0..=10 {
        let exact = 0.5f64.powi(n as i32) / 12.0;
        let z = (tr.covariances[n] - exact) / tr.std_errors[n];
        assert!(z.abs() <= 3.0, "n={n}: z={z}");
    }
    let gk = green_kubo(&tr);
    assert!((gk.sigma2 - 0.25).abs() <= 0.01, "{gk:?}");
}

#[test]
fn operator_estimator_matches_closed_form() {
    let m = 1024;
    let op = build_ulam(&ExpandingK::new(2).unwrap(), m, Construction::ExactBranches).unwrap();
    let sp = invariant_density(&op, 1e-12).unwrap();
    let u = sample_grid(m, |y| y);
    let tr = correlations_operator(&op, &sp, &u, &u, 5).unwrap();
    for n in 0..=5 {
        let exact = 0.5f64.powi(n as i32) / 12.0;
        assert!((tr.covariances[n] - exact).abs() < 1e-3, "n={n}: {}", tr.covariances[n]);
    }
}

#[test]
fn atom_estimator_agrees_with_orbit_on_the_solenoid() {
    let sol = zoo::solenoid(0.4, 0.5).unwrap();
    let base = EmpiricalMeasure::base_grid(20_001).unwrap();
    let lift = lift_measure(&sol, &base, &LiftOptions::default()).unwrap();
    let f = |p: &Point| p.z[0] + p.y;
    let atoms = correlations_measure(&sol, &lift.lifted, &f, &f, 4).unwrap();
    let orbit = correlations(&sol, &f, &f, 4, 400_000, 3).unwrap();
    for n in 0..=4 {
        let gap = (atoms.covariances[n] - orbit.covariances[n]).abs();
        assert!(gap <= 3.0 * orbit.std_errors[n] + 1e-3, "n={n}: {gap}");
    }
}

#[test]
fn correlation_lift_bound_holds_on_the_solenoid() {
    let sol = zoo::solenoid(0.4, 0.5).unwrap();
    let sh = estimate_shrinking(&sol, 30, 16, 8, 1).unwrap();
    let obs = |p: &Point| p.z[0] + 0.5 * (TAU * p.y).cos() + 0.25 * (2.0 * TAU * p.y).cos();
    let f = Potential::declared(&sol, obs, ModulusClass::lipschitz(), 2.0 + TAU, 1).unwrap();
    assert_eq!(f.violations, 0);
    let pairs: Vec<(usize, usize)> = [0, 2, 4, 6, 8].iter().flat_map(|&k| (1..=4).map(move |m| (k, m))).collect();
    let opts = LiftBoundOptions { orbit_len: 200_000, ..Default::default() };
    let rows = correlation_lift_bound_check(&sol, &f, &obs, &sh, &pairs, &opts).unwrap();
    assert_eq!(rows.len(), 20);
    for r in &rows {
        assert!(r.pass, "{r:?}");
        assert!(r.slack >= -3.0 * (r.lhs_se + r.rhs_err));
    }
    // the base term carries the bound once the fiber term is small
    assert!(rows.iter().any(|r| r.k == 0 && r.m == 1 && r.base_corr > 1e-3));
}

#[test]
fn block_sums_are_gaussian_for_doubling() {
    let d = zoo::doubling();
    let base = EmpiricalMeasure::base_grid(10_001).unwrap();
    let opts = CltOptions { n_block: 1000, samples: 400, gk_orbit: 200_000, ..Default::default() };
    let rep = clt_diagnostic(&d, &base, &|p| p.y, &opts).unwrap();
    assert!(!rep.degenerate);
    assert!(rep.ks_statistic < 0.1, "{}", rep.ks_statistic);
    assert!((rep.green_kubo_sigma - 0.5).abs() < 0.03);
}

#[test]
fn constant_observable_is_degenerate() {
    let d = zoo::doubling();
    let base = EmpiricalMeasure::base_grid(1001).unwrap();
    let opts = CltOptions { n_block: 100, samples: 100, gk_orbit: 20_000, ..Default::default() };
    let rep = clt_diagnostic(&d, &base, &|_| 1.0, &opts).unwrap();
    assert!(rep.degenerate);
    assert_eq!(rep.ks_statistic, 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ks_is_a_probability_and_affine_invariant(seed in 0u64..10_000, a in 0.1f64..10.0, b in -5.0f64..5.0) {
        let mut r = stream(seed, 0, 0);
        let xs: Vec<f64> = (0..100).map(|_| r.gen::<f64>() * 4.0 - 2.0).collect();
        let d = ks_gaussian(&xs, 0.0, 1.0);
        prop_assert!((0.0..=1.0).contains(&d));
        let ys: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        prop_assert!((ks_gaussian(&ys, b, a) - d).abs() < 1e-9);
    }

    #[test]
    fn lag_zero_covariance_is_the_variance(seed in 0u64..1000) {
        let d = zoo::doubling();
        let tr = correlations(&d, &|p| p.y, &|p| p.y, 2, 20_000, seed).unwrap();
        prop_assert!((tr.covariances[0] - 1.0 / 12.0).abs() < 0.01);
        prop_assert!(tr.values.iter().all(|v| v.1 >= 0.0));
    }
}
