use proptest::prelude::*;
use trunclap::barriers::*;
use trunclap::experiment::{barrier_ordering, max_profile_gap};
use trunclap::geometry::delta;
use trunclap::problem::ProblemSpec;
use trunclap::profile::Certificate;
use trunclap::radial_ode::{concavity_certify, convexity_certify, residual};
use trunclap::{BallDomain, RadialProfile};

fn ode_residual(p: &RadialProfile) -> f64 {
    residual(p, p.ode().expect("profile has an ODE"), 1000)
}

fn all_profiles() -> Vec<RadialProfile> {
    vec![
        ball_solution_beta_nonpos(1.0, 1, 1.0, 0.0, 1.0).unwrap(),
        ball_solution_beta_nonpos(1.0, 1, 1.0, -0.5, 1.0).unwrap(),
        ball_solution_beta_nonpos(2.0, 2, 0.5, -0.3, 1.5).unwrap(),
        ball_supersolution_beta_pos(1.0, 1, 1.0, 0.5, 1.0).unwrap(),
        ball_supersolution_beta_pos(1.5, 2, 2.0, 1.0, 2.0).unwrap(),
        nonexistence_profile(1, 1.0, 0.5).unwrap(),
        nonexistence_profile(2, 0.7, 0.9).unwrap(),
        drift_nonexistence_profile(1, 1.0, 1.0, 0.1).unwrap(),
        drift_nonexistence_profile(1, 2.0, 1.5, 0.05).unwrap(),
        drift_ball_integral_form(1.0, 1, 1.0, 0.0, 0.5, 1.0).unwrap(),
        drift_ball_log_form(1.0, 1, 1.0, 0.0, 0.5, 1.0).unwrap(),
        drift_ball_integral_form(1.0, 1, 1.0, -0.5, 0.5, 1.0).unwrap(),
        br_equals_k_solution(0.5, 1.0, 1, 1.0).unwrap(),
        partial_sum_alpha_solution(2.0, 1.0, 1).unwrap(),
        drift_blowup_integral_profile(1, 1.0, -1.0, 0.5, 1.0, 0.5).unwrap(),
    ]
}

#[test]
fn every_profile_solves_its_ode() {
    for p in all_profiles() {
        let r = ode_residual(&p);
        assert!(r <= 1e-6, "{p:?}: residual {r:e}");
    }
}

#[test]
fn declared_certificates_hold() {
    for p in all_profiles() {
        match p.certificate() {
            Certificate::Concave => assert!(concavity_certify(&p).certified, "{p:?}"),
            Certificate::Convex => assert!(convexity_certify(&p).certified, "{p:?}"),
            Certificate::None => {}
        }
    }
    for p in [
        ball_solution_beta_nonpos(1.0, 1, 1.0, -0.5, 1.0).unwrap(),
        nonexistence_profile(1, 1.0, 0.999).unwrap(),
        drift_nonexistence_profile(1, 1.0, 1.0, 0.01).unwrap(),
        drift_blowup_integral_profile(1, 1.0, -1.0, 0.5, 1.0, 0.9).unwrap(),
    ] {
        assert_eq!(p.certificate(), Certificate::Concave);
        assert!(concavity_certify(&p).certified, "{p:?}");
    }
}

#[test]
fn boundary_vanishing_and_decreasing() {
    for p in all_profiles() {
        let s = p.support();
        assert_eq!(p.value(s), 0.0, "{p:?}");
        for i in 0..1000 {
            let r = s * i as f64 / 1000.0;
            assert!(p.value(r) > 0.0, "{p:?} at {r}");
            if r > 0.0 {
                assert!(p.d1(r) <= 0.0, "{p:?} at {r}");
            }
        }
    }
}

#[test]
fn center_values() {
    let ln2 = 2f64.ln();
    let cases = [
        (ball_solution_beta_nonpos(1.0, 1, 1.0, 0.0, 1.0).unwrap(), 1.0),
        (ball_solution_beta_nonpos(1.0, 1, 1.0, -0.5, 1.0).unwrap(), (8.0f64 / 3.0).sqrt()),
        // w(0)² = 2(ln 2 − 1/2)
        (nonexistence_profile(1, 1.0, 0.5).unwrap(), (2.0 * (ln2 - 0.5)).sqrt()),
        // u(0)² = 2 ∫₀¹ r/(1 − r/2) dr = 2(4 ln 2 − 2)
        (drift_ball_integral_form(1.0, 1, 1.0, 0.0, 0.5, 1.0).unwrap(), (2.0 * (4.0 * ln2 - 2.0)).sqrt()),
        (drift_ball_log_form(1.0, 1, 1.0, 0.0, 0.5, 1.0).unwrap(), (2.0 * (4.0 * ln2 - 2.0)).sqrt()),
        (br_equals_k_solution(0.5, 1.0, 1, 1.0).unwrap(), (8.0f64 / 3.0).sqrt()),
    ];
    for (p, want) in cases {
        assert!((p.value(0.0) - want).abs() < 1e-9, "{p:?}: {} vs {want}", p.value(0.0));
    }
    assert!((nonexistence_profile(1, 1.0, 0.5).unwrap().value(0.0) - 0.621526).abs() < 5e-7);
    assert!((drift_ball_log_form(1.0, 1, 1.0, 0.0, 0.5, 1.0).unwrap().value(0.0) - 1.243051).abs() < 1e-6);
}

/// `u_ε(0)² = 2(ε − 1 + ln(1/ε))` and `w_ρ(0)² = 2(−ρ − ln(1−ρ))` for `k = b = γ = 1`.
#[test]
fn blowup_families_at_the_center() {
    for eps in [0.1f64, 0.01, 1e-3] {
        let want = (2.0f64 * (eps - 1.0 - eps.ln())).sqrt();
        let got = drift_nonexistence_profile(1, 1.0, 1.0, eps).unwrap().value(0.0);
        assert!((got - want).abs() < 1e-9, "ε={eps}: {got} vs {want}");
    }
    for rho in [0.5f64, 0.9, 0.999] {
        let want = (2.0f64 * (-rho - (1.0 - rho).ln())).sqrt();
        let got = nonexistence_profile(1, 1.0, rho).unwrap().value(0.0);
        assert!((got - want).abs() < 1e-9, "ρ={rho}: {got} vs {want}");
    }
}

proptest! {
    #[test]
    fn nonexistence_profile_increases_with_rho(a in 0.05..0.98f64, gap in 1e-3..0.02f64, t in 0.0..1.0f64) {
        let b = (a + gap).min(0.999);
        let r = t * a;
        let wa = nonexistence_profile(1, 1.0, a).unwrap().value(r);
        let wb = nonexistence_profile(1, 1.0, b).unwrap().value(r);
        prop_assert!(wb > wa);
    }

    #[test]
    fn drift_profile_increases_as_eps_shrinks(e in 1e-4..0.5f64, f in 0.1..0.9f64, t in 0.0..1.0f64) {
        let small = e * f;
        let r = t * (1.0 - e);
        let ue = drift_nonexistence_profile(1, 1.0, 1.0, e).unwrap().value(r);
        let us = drift_nonexistence_profile(1, 1.0, 1.0, small).unwrap().value(r);
        prop_assert!(us > ue);
    }
}

#[test]
fn two_formula_consistency() {
    let pos = ball_supersolution_beta_pos(1.0, 1, 1.0, 1e-12, 1.0).unwrap();
    let nonpos = ball_solution_beta_nonpos(1.0, 1, 1.0, 0.0, 1.0).unwrap();
    assert!(max_profile_gap(&pos, &nonpos) <= 1e-8);
    let int = drift_ball_integral_form(1.0, 1, 1.0, 0.0, 0.5, 1.0).unwrap();
    let log = drift_ball_log_form(1.0, 1, 1.0, 0.0, 0.5, 1.0).unwrap();
    assert!(max_profile_gap(&int, &log) <= 1e-8);
}

#[test]
fn hemisphere_boundary_ratio_is_bounded() {
    let disk = BallDomain::ball(1.0, 2).unwrap();
    let hemi = ball_solution_beta_nonpos(1.0, 1, 1.0, 0.0, 1.0).unwrap();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 1..1000 {
        let r = 0.9 + 0.1 * i as f64 / 1000.0;
        let d = delta(&disk, &[r, 0.0]);
        let q = hemi.value(r) / d.sqrt();
        lo = lo.min(q);
        hi = hi.max(q);
    }
    assert!(lo >= 1.0 && hi <= 2f64.sqrt() + 1e-12, "[{lo}, {hi}]");
    assert!((holder_exponent(1.0, 0.0).unwrap() - 0.5).abs() < 1e-15);
    assert!((holder_exponent(1.0, -0.5).unwrap() - 0.25).abs() < 1e-15);
}

#[test]
fn subsolution_below_supersolution_on_a_disk() {
    let disk = BallDomain::ball(1.0, 2).unwrap();
    for (gamma, beta) in [(1.0, 0.0), (1.0, -0.5), (2.0, 1.0)] {
        let spec = ProblemSpec::upper_power(disk.clone(), 1, gamma, beta, 1.0);
        let (violations, gap) = barrier_ordering(&spec, 1000, 1).unwrap();
        assert_eq!(violations, 0, "γ={gamma} β={beta}: min gap {gap}");
    }
}

#[test]
fn regime_errors() {
    assert!(holder_exponent(1.0, -1.0).is_err());
    assert!(nonexistence_profile(1, 1.0, 1.0).is_err());
    assert!(drift_nonexistence_profile(1, 1.0, 1.0, 1.0).is_err());
    assert!(br_equals_k_solution(1.0, 1.0, 1, 1.0).is_err());
    assert!(partial_sum_alpha_solution(0.5, 1.0, 1).is_err());
}
