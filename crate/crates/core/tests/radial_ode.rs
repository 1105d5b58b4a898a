use trunclap::radial_ode::{concavity_certify, infinity_laplacian_profile, residual, shoot_second_order};

#[test]
fn one_dimensional_energy_oracle() {
    // u′²/2 + ln u = ln u(0) gives R = u(0)√(π/2) for γ = 1.
    let p = shoot_second_order(1, 1.0, 1.0).unwrap();
    assert!((p.value(0.0) - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-4);
    assert!(residual(&p, p.ode().unwrap(), 1000) < 1e-4);
}

#[test]
fn shooting_profiles_decrease_and_stay_positive() {
    for (kdim, gamma, radius) in [(1, 1.0, 1.0), (2, 1.0, 1.0), (3, 0.5, 2.0), (2, 2.0, 0.5)] {
        let p = shoot_second_order(kdim, gamma, radius).unwrap();
        assert!(p.value(radius).abs() < 1e-9);
        let mut prev = f64::INFINITY;
        for i in 0..1000 {
            let r = radius * i as f64 / 1000.0;
            let v = p.value(r);
            assert!(v > 0.0 && v < prev, "kdim={kdim} γ={gamma}: u({r}) = {v}");
            prev = v;
        }
    }
}

#[test]
fn flux_is_nonincreasing() {
    for (kdim, gamma) in [(2, 1.0), (3, 1.0), (4, 0.5)] {
        let p = shoot_second_order(kdim, gamma, 1.0).unwrap();
        let flux = |r: f64| r.powi(kdim as i32 - 1) * p.d1(r);
        let mut prev = flux(1e-3);
        for i in 2..1000 {
            let r = i as f64 / 1000.0;
            let f = flux(r);
            assert!(f <= prev + 1e-9, "kdim={kdim}: flux rose at {r}");
            prev = f;
        }
        assert!(concavity_certify(&p).certified);
    }
}

#[test]
fn boundary_gradient_dichotomy() {
    for (gamma, finite) in [(0.5, true), (0.9, true), (1.0, false), (1.5, false), (2.0, false)] {
        let (_, report) = infinity_laplacian_profile(gamma, 1.0).unwrap();
        assert_eq!(report.finite_boundary_gradient, finite, "γ={gamma}");
        assert!(report.energy_residual < 1e-6, "γ={gamma}: {}", report.energy_residual);
        if let Some(g) = report.boundary_gradient {
            assert!((report.measured_gradient_near_boundary - g).abs() < 0.05 * g);
        }
    }
}

#[test]
fn invalid_parameters() {
    assert!(shoot_second_order(0, 1.0, 1.0).is_err());
    assert!(shoot_second_order(1, 0.0, 1.0).is_err());
    assert!(shoot_second_order(1, 1.0, -1.0).is_err());
}
