mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use trunclap::operators::{
    evaluate, frame_relaxation, frames_2d, partial_sum_lower, partial_sum_upper, radial_hessian_eigen,
    sandwich_check, FrameMode, OperatorSpec,
};
use trunclap::SymMatrix;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn duality(seed in any::<u64>()) {
        let mut r = rng(seed);
        for n in DIMS {
            let x = random_sym(n, 5.0, &mut r);
            for k in 1..=n {
                let lo = partial_sum_lower(&x, k).unwrap();
                let up = partial_sum_upper(&x.scale(-1.0), k).unwrap();
                prop_assert!((lo + up).abs() <= tol(&x), "n={n} k={k}: {lo} vs {up}");
            }
        }
    }

    #[test]
    fn shift_rule(seed in any::<u64>(), t in -10.0..10.0f64) {
        let mut r = rng(seed);
        for n in DIMS {
            let x = random_sym(n, 5.0, &mut r);
            let shifted = x.add(&SymMatrix::identity(n).scale(t));
            for k in 1..=n {
                let kt = k as f64 * t;
                let e = tol(&shifted);
                prop_assert!((partial_sum_lower(&shifted, k).unwrap() - partial_sum_lower(&x, k).unwrap() - kt).abs() <= e);
                prop_assert!((partial_sum_upper(&shifted, k).unwrap() - partial_sum_upper(&x, k).unwrap() - kt).abs() <= e);
            }
        }
    }

    #[test]
    fn orthogonal_invariance(seed in any::<u64>()) {
        let mut r = rng(seed);
        for n in DIMS {
            let x = random_sym(n, 5.0, &mut r);
            let q = random_orthogonal(n, &mut r);
            let y = x.conjugate(&q);
            for k in 1..=n {
                prop_assert!((partial_sum_lower(&x, k).unwrap() - partial_sum_lower(&y, k).unwrap()).abs() <= tol(&x));
                prop_assert!((partial_sum_upper(&x, k).unwrap() - partial_sum_upper(&y, k).unwrap()).abs() <= tol(&x));
            }
        }
    }

    #[test]
    fn degenerate_ellipticity(seed in any::<u64>()) {
        let mut r = rng(seed);
        for n in DIMS {
            let x = random_sym(n, 5.0, &mut r);
            let y = random_psd(n, &mut r);
            let q = if r.gen_bool(0.1) { vec![0.0; n] } else { random_vec(n, &mut r) };
            for spec in all_kinds(n, &mut r) {
                let f0 = evaluate(&spec, &x, Some(&q)).unwrap();
                let f1 = evaluate(&spec, &x.add(&y), Some(&q)).unwrap();
                prop_assert!(f1 >= f0 - tol(&x.add(&y)), "{}: {f0} -> {f1}", spec.name());
            }
        }
    }

    #[test]
    fn sandwich_every_kind(seed in any::<u64>()) {
        let mut r = rng(seed);
        for n in DIMS {
            let x = random_sym(n, 5.0, &mut r);
            let q = if r.gen_bool(0.1) { vec![0.0; n] } else { random_vec(n, &mut r) };
            for spec in all_kinds(n, &mut r) {
                if matches!(spec, OperatorSpec::MinimalSurface) {
                    continue;
                }
                prop_assert!(sandwich_check(&spec, &x, Some(&q)), "{} on n={n}", spec.name());
            }
        }
    }

    #[test]
    fn minimal_surface_upper_bound_on_negative_matrices(seed in any::<u64>()) {
        let mut r = rng(seed);
        for n in DIMS {
            let p = random_psd(n, &mut r);
            let x = p.scale(-1.0);
            let q = random_vec(n, &mut r);
            let f = evaluate(&OperatorSpec::MinimalSurface, &x, Some(&q)).unwrap();
            prop_assert!(f <= partial_sum_upper(&x, n - 1).unwrap() + tol(&x));
            prop_assert!(sandwich_check(&OperatorSpec::MinimalSurface, &x, Some(&q)));
        }
    }

    #[test]
    fn sub_and_superadditivity(seed in any::<u64>()) {
        let mut r = rng(seed);
        for n in DIMS {
            let x = random_sym(n, 5.0, &mut r);
            let y = random_sym(n, 5.0, &mut r);
            let s = x.add(&y);
            for k in 1..=n {
                let e = tol(&x) + tol(&y);
                prop_assert!(partial_sum_lower(&x, k).unwrap() + partial_sum_lower(&y, k).unwrap() <= partial_sum_lower(&s, k).unwrap() + e);
                prop_assert!(partial_sum_upper(&s, k).unwrap() <= partial_sum_upper(&x, k).unwrap() + partial_sum_upper(&y, k).unwrap() + e);
            }
        }
    }

    #[test]
    fn nested_frames_increase_to_upper(seed in any::<u64>()) {
        let mut r = rng(seed);
        let x = random_sym(2, 5.0, &mut r);
        let exact = partial_sum_upper(&x, 1).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for m in [2, 4, 8, 16, 32, 64] {
            let v = frame_relaxation(&x, 1, &frames_2d(m), FrameMode::Sup).unwrap();
            prop_assert!(v >= prev - 1e-12);
            prop_assert!(v <= exact + tol(&x));
            prev = v;
        }
        let inf = frame_relaxation(&x, 1, &frames_2d(64), FrameMode::Inf).unwrap();
        prop_assert!(inf >= partial_sum_lower(&x, 1).unwrap() - tol(&x));
    }

    #[test]
    fn eigenframe_attains_partial_sums(seed in any::<u64>()) {
        let mut r = rng(seed);
        for n in DIMS {
            let x = random_sym(n, 5.0, &mut r);
            let (_, vecs) = x.eigen();
            for k in 1..=n {
                let top = vec![vecs[n - k..].to_vec()];
                let bottom = vec![vecs[..k].to_vec()];
                let up = frame_relaxation(&x, k, &top, FrameMode::Sup).unwrap();
                let lo = frame_relaxation(&x, k, &bottom, FrameMode::Inf).unwrap();
                prop_assert!((up - partial_sum_upper(&x, k).unwrap()).abs() <= tol(&x));
                prop_assert!((lo - partial_sum_lower(&x, k).unwrap()).abs() <= tol(&x));
            }
        }
    }
}

#[test]
fn rotated_diagonal_partial_sums() {
    let mut r = rng(7);
    let x = SymMatrix::from_diagonal(&[-1.0, 0.0, 4.0]);
    for _ in 0..20 {
        let y = x.conjugate(&random_orthogonal(3, &mut r));
        assert!((partial_sum_lower(&y, 1).unwrap() + 1.0).abs() < 1e-12);
        assert!((partial_sum_upper(&y, 1).unwrap() - 4.0).abs() < 1e-12);
    }
}

#[test]
fn rotated_frames_miss_the_maximum() {
    let a = 22.5f64.to_radians();
    let (c, s) = (a.cos(), a.sin());
    let x = SymMatrix::from_rows(&[
        vec![2.0 * c * c - s * s, 3.0 * c * s],
        vec![3.0 * c * s, 2.0 * s * s - c * c],
    ])
    .unwrap();
    let v = frame_relaxation(&x, 1, &frames_2d(4), FrameMode::Sup).unwrap();
    assert!((v - (2.0 * c * c - s * s)).abs() < 1e-12);
    assert!((v - 1.560660).abs() < 1e-6);
}

/// Finite-difference Hessian of `|x|⁴` against the radial spectrum.
#[test]
fn radial_spectrum_of_quartic() {
    let f = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().powi(2);
    for n in [2, 3, 4] {
        let mut x = vec![0.0; n];
        x[0] = 0.3;
        x[1] = -0.4;
        let r = 0.5;
        let h = 1e-4;
        let mut hess = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut pp = x.clone();
                let mut pm = x.clone();
                let mut mp = x.clone();
                let mut mm = x.clone();
                pp[i] += h;
                pp[j] += h;
                pm[i] += h;
                pm[j] -= h;
                mp[i] -= h;
                mp[j] += h;
                mm[i] -= h;
                mm[j] -= h;
                hess[i][j] = (f(&pp) - f(&pm) - f(&mp) + f(&mm)) / (4.0 * h * h);
            }
        }
        for i in 0..n {
            for j in 0..i {
                let m = 0.5 * (hess[i][j] + hess[j][i]);
                hess[i][j] = m;
                hess[j][i] = m;
            }
        }
        let fd = SymMatrix::from_rows(&hess).unwrap().eigenvalues();
        let radial = radial_hessian_eigen(12.0 * r * r, 4.0 * r * r, n);
        for (a, b) in fd.iter().zip(&radial.eigenvalues) {
            assert!((a - b).abs() < 1e-6, "n={n}: {fd:?} vs {:?}", radial.eigenvalues);
        }
    }
}

#[test]
fn hemisphere_spectrum_selects_tangential_value() {
    for r in [0.1f64, 0.5, 0.9] {
        let s = 1.0 - r * r;
        let upp = -s.powf(-1.5);
        let upr = -s.powf(-0.5);
        assert!(upp <= upr);
        let e = radial_hessian_eigen(upp, upr, 2);
        assert_eq!(e.upper[0], upr);
        assert_eq!(e.lower[0], upp);
    }
}
