//! Radial reductions: the first-order ODEs solved by the closed forms, and the
//! second-order problem
//!
//! ```text
//! u″ + (k−1)u′/r + u^{−γ} = 0,   u′(0) = 0,   u(R) = 0,
//! ```
//!
//! which is solved by shooting on `u(0)` with an embedded Dormand–Prince
//! 5(4) integrator and then rescaled exactly onto radius `R`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profile::{Certificate, HermiteTable, RadialProfile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("shooting failed: {0}")]
    ShootingFailed(String),
    #[error("invalid parameter: {0}")]
    BadParameter(String),
}

/// Radial weight `p(r)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialWeight {
    Constant { c: f64 },
    /// `c (R − r)^exponent`.
    DistancePower { c: f64, exponent: f64, radius: f64 },
}

impl RadialWeight {
    pub fn at(&self, r: f64) -> f64 {
        match *self {
            RadialWeight::Constant { c } => c,
            RadialWeight::DistancePower { c, exponent, radius } => c * (radius - r).powf(exponent),
        }
    }
}

/// Defining ODE of a radial profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum RadialOdeSpec {
    /// `k u′/r + sign·b·u′ + p(r) u^{−γ} = 0`.
    FirstOrderK {
        k: usize,
        gamma: f64,
        b: f64,
        sign: f64,
        weight: RadialWeight,
        radius: f64,
    },
    /// `u″ + (kdim−1) u′/r + u^{−γ} = 0`.
    SecondOrderKdim { kdim: usize, gamma: f64, radius: f64 },
}

impl RadialOdeSpec {
    pub fn radius(&self) -> f64 {
        match *self {
            RadialOdeSpec::FirstOrderK { radius, .. } | RadialOdeSpec::SecondOrderKdim { radius, .. } => {
                radius
            }
        }
    }

    /// `|LHS| / (1 + |source|)` at one radius.
    pub fn pointwise_residual(&self, r: f64, u: f64, du: f64, d2u: f64) -> f64 {
        match *self {
            RadialOdeSpec::FirstOrderK {
                k,
                gamma,
                b,
                sign,
                weight,
                ..
            } => {
                let source = weight.at(r) * u.powf(-gamma);
                let lhs = k as f64 * du / r + sign * b * du + source;
                lhs.abs() / (1.0 + source.abs())
            }
            RadialOdeSpec::SecondOrderKdim { kdim, gamma, .. } => {
                let source = u.powf(-gamma);
                let lhs = d2u + (kdim as f64 - 1.0) * du / r + source;
                lhs.abs() / (1.0 + source.abs())
            }
        }
    }
}

/// Max relative residual of `profile` against `spec` on `grid_size` points of
/// the support, excluding `10⁻⁶`-neighborhoods of both endpoints.
pub fn residual(profile: &RadialProfile, spec: &RadialOdeSpec, grid_size: usize) -> f64 {
    let s = profile.support();
    let a = 1e-6 * s;
    let b = s - 1e-6 * s;
    let n = grid_size.max(2);
    (0..n)
        .map(|i| {
            let r = a + (b - a) * i as f64 / (n - 1) as f64;
            let (u, du, d2u) = profile.eval(r);
            spec.pointwise_residual(r, u, du, d2u)
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConcavityReport {
    pub certified: bool,
    pub first_violation: Option<f64>,
}

fn certify_with(profile: &RadialProfile, upper: bool) -> ConcavityReport {
    let n = 1000;
    let s = profile.support();
    for i in 1..=n {
        let r = s * i as f64 / (n + 1) as f64;
        let (_, du, d2u) = profile.eval(r);
        let slope = du / r;
        let tol = 1e-8 * (1.0 + slope.abs());
        let ok = if upper {
            d2u <= slope + tol
        } else {
            d2u >= slope - tol
        };
        if !ok {
            return ConcavityReport {
                certified: false,
                first_violation: Some(r),
            };
        }
    }
    ConcavityReport {
        certified: true,
        first_violation: None,
    }
}

/// Checks `u″ ≤ u′/r + 10⁻⁸(1 + |u′/r|)` on a 10³-point interior grid.
pub fn concavity_certify(profile: &RadialProfile) -> ConcavityReport {
    certify_with(profile, true)
}

/// Checks the reverse inequality `u″ ≥ u′/r − 10⁻⁸(1 + |u′/r|)`.
pub fn convexity_certify(profile: &RadialProfile) -> ConcavityReport {
    certify_with(profile, false)
}

const KNOT_SCALE: f64 = 0.03;

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct Trajectory {
    r: Vec<f64>,
    u: Vec<f64>,
    du: Vec<f64>,
    d2u: Vec<f64>,
    boundary: f64,
}

fn rhs(kdim: f64, gamma: f64, r: f64, y: [f64; 2]) -> [f64; 2] {
    [y[1], -(kdim - 1.0) * y[1] / r - y[0].powf(-gamma)]
}

const RTOL: f64 = 1e-11;
const MAX_STEPS: usize = 200_000;

/// Integrates from the series start until `u < 10⁻¹² u(0)`; the boundary
/// radius is then extrapolated linearly.
fn integrate_from(kdim: usize, gamma: f64, u0: f64, r_start: f64) -> Result<Trajectory, OdeError> {
    let k = kdim as f64;
    let src0 = u0.powf(-gamma);
    let mut r = r_start;
    let mut y = [u0 - src0 * r * r / (2.0 * k), -src0 * r / k];
    let mut t = Trajectory {
        r: vec![0.0, r],
        u: vec![u0, y[0]],
        du: vec![0.0, y[1]],
        d2u: vec![-src0 / k, rhs(k, gamma, r, y)[1]],
        boundary: f64::NAN,
    };
    let atol = 1e-14 * u0;
    let mut h = r_start;
    let stop = 1e-12 * u0;
    for _ in 0..MAX_STEPS {
        let mut ks = [[0.0; 2]; 7];
        ks[0] = rhs(k, gamma, r, y);
        let mut bad = false;
        for s in 1..7 {
            let mut ys = y;
            for (j, kj) in ks.iter().enumerate().take(s) {
                ys[0] += h * A[s][j] * kj[0];
                ys[1] += h * A[s][j] * kj[1];
            }
            if !(ys[0] > 0.0) {
                bad = true;
                break;
            }
            ks[s] = rhs(k, gamma, r + C[s] * h, ys);
        }
        if bad {
            h *= 0.25;
            if h < 1e-16 * r {
                break;
            }
            continue;
        }
        let mut y5 = y;
        let mut y4 = y;
        for s in 0..7 {
            y5[0] += h * A[6].get(s).copied().unwrap_or(0.0) * ks[s][0];
            y5[1] += h * A[6].get(s).copied().unwrap_or(0.0) * ks[s][1];
            y4[0] += h * B4[s] * ks[s][0];
            y4[1] += h * B4[s] * ks[s][1];
        }
        let mut err: f64 = 0.0;
        for i in 0..2 {
            let sc = atol + RTOL * y[i].abs().max(y5[i].abs());
            err = err.max((y5[i] - y4[i]).abs() / sc);
        }
        if err <= 1.0 && y5[0] > 0.0 {
            r += h;
            y = y5;
            t.r.push(r);
            t.u.push(y[0]);
            t.du.push(y[1]);
            t.d2u.push(rhs(k, gamma, r, y)[1]);
            if y[0] < stop {
                break;
            }
            if y[1] >= 0.0 {
                return Err(OdeError::ShootingFailed(format!(
                    "trajectory stopped decreasing at r = {r}"
                )));
            }
        }
        let fac = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= fac;
        // Keep knots dense where u runs to zero so the Hermite table resolves
        // the boundary layer.
        if y[1] < 0.0 {
            h = h.min(KNOT_SCALE * y[0] / -y[1]);
        }
        if h < 1e-16 * r {
            break;
        }
    }
    let (u, du) = (*t.u.last().unwrap(), *t.du.last().unwrap());
    if u > 1e-6 * u0 || du >= 0.0 {
        return Err(OdeError::ShootingFailed(format!(
            "integration stalled at r = {r} with u = {u:e}"
        )));
    }
    t.boundary = r + u / du.abs();
    Ok(t)
}

/// Solves `u″ + (kdim−1)u′/r + u^{−γ} = 0`, `u′(0) = 0`, `u(R) = 0`.
///
/// The boundary radius `ρ(u₀)` grows with `u₀`; `u₀` is bisected in log space
/// on `[10⁻³, 10³]·R^{2/(γ+1)}` and the final trajectory is rescaled onto `R`
/// through `v(r) = a^{−2/(γ+1)} u(a r)`, `a = ρ/R`.
pub fn shoot_second_order(kdim: usize, gamma: f64, radius: f64) -> Result<RadialProfile, OdeError> {
    if kdim == 0 {
        return Err(OdeError::BadParameter("kdim must be ≥ 1".into()));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(OdeError::BadParameter(format!("γ must be positive, got {gamma}")));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(OdeError::BadParameter(format!("R must be positive, got {radius}")));
    }
    let scale = radius.powf(2.0 / (gamma + 1.0));
    let r_start = |u0: f64| 1e-4 * u0.powf((gamma + 1.0) / 2.0);
    let run = |u0: f64| integrate_from(kdim, gamma, u0, r_start(u0));

    let mut lo = (1e-3 * scale).ln();
    let mut hi = (1e3 * scale).ln();
    let t_lo = run(lo.exp())?;
    let t_hi = run(hi.exp())?;
    if !(t_lo.boundary < radius && radius < t_hi.boundary) {
        return Err(OdeError::ShootingFailed(format!(
            "bracket [{}, {}] does not straddle R = {radius}",
            t_lo.boundary, t_hi.boundary
        )));
    }
    let mut best = None;
    let mut iterations = 0;
    for it in 0..200 {
        iterations = it + 1;
        let mid = 0.5 * (lo + hi);
        let t = run(mid.exp())?;
        let rel = (t.boundary - radius) / radius;
        let done = rel.abs() < 1e-12 || hi - lo < 1e-13;
        if t.boundary < radius {
            lo = mid;
        } else {
            hi = mid;
        }
        best = Some((mid.exp(), t));
        if done {
            break;
        }
    }
    let (u0_raw, t) = best.ok_or_else(|| OdeError::ShootingFailed("no iterations".into()))?;

    let a = t.boundary / radius;
    let e = 2.0 / (gamma + 1.0);
    let su = a.powf(-e);
    let mut table = HermiteTable {
        r: t.r.iter().map(|r| r / a).collect(),
        u: t.u.iter().map(|u| su * u).collect(),
        du: t.du.iter().map(|d| su * a * d).collect(),
        d2u: t.d2u.iter().map(|d| su * a * a * d).collect(),
    };
    let last_d2 = *table.d2u.last().unwrap();
    let last_du = *table.du.last().unwrap();
    table.r.push(radius);
    table.u.push(0.0);
    table.du.push(last_du);
    table.d2u.push(last_d2);

    let mut params = BTreeMap::new();
    params.insert("kdim".into(), kdim as f64);
    params.insert("gamma".into(), gamma);
    params.insert("radius".into(), radius);
    params.insert("u0".into(), su * u0_raw);
    params.insert("shooting_iterations".into(), iterations as f64);
    params.insert("knots".into(), table.r.len() as f64);
    Ok(RadialProfile::table(
        "shoot_second_order",
        table,
        Some(RadialOdeSpec::SecondOrderKdim { kdim, gamma, radius }),
        Certificate::Concave,
        params,
    ))
}

/// Boundary regularity of the one-dimensional profile.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct C1Report {
    pub gamma: f64,
    pub u0: f64,
    /// `γ < 1`.
    pub finite_boundary_gradient: bool,
    /// `√(2u(0)^{1−γ}/(1−γ))` when finite.
    pub boundary_gradient: Option<f64>,
    /// `|u′|` at the last integration knot before the boundary.
    pub measured_gradient_near_boundary: f64,
    /// Max over knots of `|E(r) − E(0)| / (1 + u′²/2 + |Φ(u)|)`.
    pub energy_residual: f64,
}

fn energy_potential(u: f64, gamma: f64) -> f64 {
    if gamma == 1.0 {
        u.ln()
    } else {
        u.powf(1.0 - gamma) / (1.0 - gamma)
    }
}

/// `u′²/2 + Φ(u) − Φ(u(0))` relative to the size of its terms.
pub fn energy_residual(u: f64, du: f64, u0: f64, gamma: f64) -> f64 {
    let phi = energy_potential(u, gamma);
    let e = 0.5 * du * du + phi - energy_potential(u0, gamma);
    e.abs() / (1.0 + 0.5 * du * du + phi.abs())
}

/// The profile `U(x) = u(|x|)` with `u` the one-dimensional shooting solution,
/// which solves `Δ∞U + U^{−γ} = 0`; plus its boundary-gradient report.
pub fn infinity_laplacian_profile(gamma: f64, radius: f64) -> Result<(RadialProfile, C1Report), OdeError> {
    let profile = shoot_second_order(1, gamma, radius)?;
    let t = profile.table_data().expect("shooting returns a table");
    let u0 = t.u[0];
    let n = t.r.len();
    let energy = (0..n - 1)
        .map(|i| energy_residual(t.u[i], t.du[i], u0, gamma))
        .fold(0.0, f64::max);
    let finite = gamma < 1.0;
    let report = C1Report {
        gamma,
        u0,
        finite_boundary_gradient: finite,
        boundary_gradient: finite.then(|| (2.0 * u0.powf(1.0 - gamma) / (1.0 - gamma)).sqrt()),
        measured_gradient_near_boundary: t.du[n - 2].abs(),
        energy_residual: energy,
    };
    Ok((profile, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kdim1_gamma1_oracle() {
        let p = shoot_second_order(1, 1.0, 1.0).unwrap();
        let u0 = p.value(0.0);
        assert!((u0 - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-6, "{u0}");
        assert_eq!(p.value(1.0), 0.0);
    }

    #[test]
    fn energy_identity_holds() {
        let (_, rep) = infinity_laplacian_profile(0.5, 1.0).unwrap();
        assert!(rep.energy_residual < 1e-6, "{}", rep.energy_residual);
        let g = rep.boundary_gradient.unwrap();
        assert!((g - 2.0 * rep.u0.powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn certify_examples() {
        let sq = RadialProfile::custom("r2", 1.0, |r| r * r);
        assert!(concavity_certify(&sq).certified);
        let r4 = RadialProfile::custom("r4", 1.0, |r| r.powi(4));
        let rep = concavity_certify(&r4);
        assert!(!rep.certified && rep.first_violation.is_some());
    }

    #[test]
    fn bad_parameters() {
        assert!(shoot_second_order(0, 1.0, 1.0).is_err());
        assert!(shoot_second_order(1, -1.0, 1.0).is_err());
    }
}
