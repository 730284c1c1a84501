use fiberlift::lifting::{lift_measure, LiftOptions};
use fiberlift::systems::{estimate_shrinking, pomeau_manneville, zoo, BaseMap, ExpandingK};
use fiberlift::thermo::*;
use fiberlift::transfer::{build_ulam, invariant_density, Construction};
use fiberlift::{EmpiricalMeasure, ModulusClass, ModulusKind, Point};
use proptest::prelude::*;

fn norm(p: &Point) -> f64 {
    (p.z[0] * p.z[0] + p.z[1] * p.z[1]).sqrt()
}

#[test]
fn toy_oscillation_is_the_closed_form() {
    for lambda in [0.3, 0.5, 0.7] {
        let toy = zoo::toy(lambda).unwrap();
        let sh = estimate_shrinking(&toy, 30, 16, 8, 1).unwrap();
        let phi = Potential::declared(&toy, |p| p.z[0], ModulusClass::lipschitz(), 2.0, 1).unwrap();
        assert_eq!(phi.violations, 0);
        let cob = build_coboundary(&toy, &phi, &sh, &CoboundaryOptions::default()).unwrap();
        // φ̂ = λ^{N+1}·z on the toy, so the spread over [−1, 1] is 2λ^{N+1}
        let exact = 2.0 * lambda.powi(cob.n as i32 + 1);
        assert!((cob.fiber_oscillation - exact).abs() < 1e-12 + 1e-9 * exact, "λ={lambda}");
        assert!(cob.fiber_oscillation <= 1.1 * cob.truncation_bound);
        assert!(cob.fiber_oscillation <= 1e-3);
    }
}

#[test]
fn solenoid_projection_and_energy() {
    let sol = zoo::solenoid(0.4, 0.5).unwrap();
    let sh = estimate_shrinking(&sol, 30, 16, 8, 1).unwrap();
    let phi = Potential::declared(&sol, norm, ModulusClass::lipschitz(), 2.0, 1).unwrap();
    assert_eq!(phi.violations, 0);
    let cob = build_coboundary(&sol, &phi, &sh, &CoboundaryOptions::default()).unwrap();
    assert!(cob.fiber_oscillation <= 1e-3, "{cob:?}");
    let base = EmpiricalMeasure::base_grid(100_001).unwrap();
    let lift = lift_measure(&sol, &base, &LiftOptions::default()).unwrap();
    let e = energy_consistency(&sol, &cob, &lift.lifted, &base).unwrap();
    assert!(e.total_gap <= 1e-3, "{e:?}");
    assert!(e.coboundary_term <= e.cancellation_bound);
}

#[test]
fn phi_check_is_holder_at_the_predicted_exponent() {
    let sol = zoo::solenoid(0.4, 0.5).unwrap();
    let sh = estimate_shrinking(&sol, 30, 16, 8, 1).unwrap();
    let gamma = exponent_arithmetic(1.0, 1.0, 2.0, &sh.fit, ModulusKind::Holder).unwrap();
    // 0.4 = 2^{-log2(2.5)} gives γ = 1/(1 + ln 2/ln 2.5)
    let expected = 1.0 / (1.0 + 2f64.ln() / 2.5f64.ln());
    assert!((gamma.alpha - expected).abs() < 0.01, "{}", gamma.alpha);
    let phi = Potential::declared(&sol, norm, ModulusClass::lipschitz(), 2.0, 1).unwrap();
    let cob = CoboundaryResult::with_truncation(&sol, &phi, 25);
    let scales: Vec<f64> = (3..=12).map(|j| 0.5f64.powi(j)).collect();
    let pc = |y: f64| cob.phi_check(y);
    let q = holder_quotients(&pc, &gamma, &scales, 2048);
    let hi = q.iter().map(|e| e.1).fold(0.0, f64::max);
    assert!(hi.is_finite() && hi <= 2.0 * q[0].1 + 1e-9, "{q:?}");
}

#[test]
fn pm_geometric_potential_gives_the_acip() {
    let pm = pomeau_manneville(0.3).unwrap();
    let m = 512;
    let wt = weighted_transfer(&pm, &|y| -pm.log_derivative(y).unwrap(), m).unwrap();
    assert!(wt.pressure.abs() < 1e-3, "pressure {}", wt.pressure);
    let op = build_ulam(&pm, m, Construction::ExactBranches).unwrap();
    let sp = invariant_density(&op, 1e-12).unwrap();
    let l1: f64 = wt.equilibrium.masses().iter().zip(sp.invariant_density.masses()).map(|(a, b)| (a - b).abs()).sum();
    assert!(l1 < 0.05, "L1 {l1}");
}

#[test]
fn exponent_arithmetic_rejects_contracting_base() {
    let fit = fiberlift::DecayFit::exponential(0.4, 1.0);
    assert!(exponent_arithmetic(1.0, 1.0, 0.5, &fit, ModulusKind::Holder).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn pressure_shifts_with_constants(c in -3.0f64..3.0, a in -1.0f64..1.0) {
        let s = ExpandingK::new(2).unwrap();
        let f = move |y: f64| a * (std::f64::consts::TAU * y).cos();
        let base = weighted_transfer(&s, &f, 64).unwrap();
        let shifted = weighted_transfer(&s, &move |y| f(y) + c, 64).unwrap();
        prop_assert!((shifted.pressure - base.pressure - c).abs() < 1e-9);
        prop_assert!(base.normalization_defect() < 1e-9);
        prop_assert!(base.eigenfunction.iter().all(|h| *h > 0.0));
    }

    #[test]
    fn projected_potential_differs_by_a_coboundary(y in 0.0f64..1.0, r in 0.0f64..1.0, t in 0.0f64..1.0, n in 0usize..15) {
        let sol = zoo::solenoid(0.4, 0.5).unwrap();
        let phi = Potential::declared(&sol, norm, ModulusClass::lipschitz(), 2.0, 1).unwrap();
        let cob = CoboundaryResult::with_truncation(&sol, &phi, n);
        let x = Point::new(y, [r * (std::f64::consts::TAU * t).cos(), r * (std::f64::consts::TAU * t).sin()]);
        let lhs = cob.phi_hat(&x) - phi.eval(&x);
        let rhs = cob.h(&x) - cob.h(&sol.apply_t(&x));
        prop_assert!((lhs - rhs).abs() < 1e-12);
        // φ̂(x) − φ̂(σπx) = φ(T^{N+1}x) − φ(T^{N+1}σπx)
        let x0 = sol.section(y);
        prop_assert!((cob.phi_hat(&x) - cob.phi_hat(&x0)).abs() <= 2.0 * 0.4f64.powi(n as i32 + 1) + 1e-12);
    }
}
