//! Closed-form radial solutions, sub/supersolution barriers and the boundary
//! exponents they imply.

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{self, BallDomain, DistanceConstants, GeometryError};
use crate::matrix::SymMatrix;
use crate::operators::OperatorSpec;
use crate::problem::{ProblemError, ProblemSpec};
pub use crate::problem::RegimeError;
use crate::profile::{Certificate, ClosedForm, RadialProfile};
use crate::radial_ode::{RadialOdeSpec, RadialWeight};

/// Samples used when measuring the regularized-distance constants.
pub const CONSTANT_SAMPLES: usize = 2000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BarrierError {
    #[error(transparent)]
    Regime(#[from] RegimeError),
    #[error("ε = {eps} must lie in (0, k/b = {limit})")]
    BadEpsilon { eps: f64, limit: f64 },
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

fn regime(msg: String) -> BarrierError {
    BarrierError::Regime(RegimeError(msg))
}

fn positive(name: &str, v: f64) -> Result<(), BarrierError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(BarrierError::BadParameter(format!("{name} must be positive, got {v}")))
    }
}

/// `σ = min{1/(γ+1), (β+1)/(γ+1)}`.
pub fn holder_exponent(gamma: f64, beta: f64) -> Result<f64, BarrierError> {
    if beta <= -1.0 {
        return Err(regime(format!("β = {beta} ≤ −1: no Hölder bound")));
    }
    positive("γ", gamma)?;
    Ok((1.0f64).min(beta + 1.0) / (gamma + 1.0))
}

/// Exact solution of `k u′/r + c₂(R−r)^β u^{−γ} = 0`, `u′(0) = 0`, `u(R) = 0`
/// for `β ∈ (−1, 0]`.
pub fn ball_solution_beta_nonpos(
    c2: f64,
    k: usize,
    gamma: f64,
    beta: f64,
    radius: f64,
) -> Result<RadialProfile, BarrierError> {
    if !(beta > -1.0 && beta <= 0.0) {
        return Err(regime(format!("β = {beta} outside (−1, 0]")));
    }
    positive("c₂", c2)?;
    positive("γ", gamma)?;
    positive("R", radius)?;
    let k = k as f64;
    Ok(RadialProfile::closed(
        ClosedForm::BallNonpos { c2, k, gamma, beta, radius },
        Some(RadialOdeSpec::FirstOrderK {
            k: k as usize,
            gamma,
            b: 0.0,
            sign: 0.0,
            weight: RadialWeight::DistancePower { c: c2, exponent: beta, radius },
            radius,
        }),
        Certificate::Concave,
    ))
}

/// `[c₂R^β(1+γ)/(2k) (R² − r²)]^{1/(1+γ)}`: the exact solution with the
/// constant weight `c₂R^β`, hence a supersolution for `c₂(R−r)^β`, `β > 0`.
pub fn ball_supersolution_beta_pos(
    c2: f64,
    k: usize,
    gamma: f64,
    beta: f64,
    radius: f64,
) -> Result<RadialProfile, BarrierError> {
    if beta <= 0.0 {
        return Err(regime(format!("β = {beta} ≤ 0: use the exact β ≤ 0 solution")));
    }
    positive("c₂", c2)?;
    positive("γ", gamma)?;
    positive("R", radius)?;
    Ok(ball_pos_unchecked(c2, k, gamma, beta, radius))
}

fn ball_pos_unchecked(c2: f64, k: usize, gamma: f64, beta: f64, radius: f64) -> RadialProfile {
    RadialProfile::closed(
        ClosedForm::BallPos { c2, k: k as f64, gamma, beta, radius },
        Some(RadialOdeSpec::FirstOrderK {
            k,
            gamma,
            b: 0.0,
            sign: 0.0,
            weight: RadialWeight::Constant { c: c2 * radius.powf(beta) },
            radius,
        }),
        Certificate::Concave,
    )
}

/// The same closed form as [`ball_supersolution_beta_pos`] without the `β > 0`
/// guard, for comparing the two branches at `β → 0⁺`.
pub fn ball_supersolution_any_beta(c2: f64, k: usize, gamma: f64, beta: f64, radius: f64) -> RadialProfile {
    ball_pos_unchecked(c2, k, gamma, beta, radius)
}

/// `w_ρ`, solving `k w′/r + w^{−γ}/(1−r) = 0` on `[0, ρ]`, `w(ρ) = 0`.
pub fn nonexistence_profile(k: usize, gamma: f64, rho: f64) -> Result<RadialProfile, BarrierError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(BarrierError::BadParameter(format!("ρ = {rho} outside (0, 1)")));
    }
    positive("γ", gamma)?;
    Ok(RadialProfile::closed(
        ClosedForm::Blowup { k: k as f64, gamma, rho },
        Some(RadialOdeSpec::FirstOrderK {
            k,
            gamma,
            b: 0.0,
            sign: 0.0,
            weight: RadialWeight::DistancePower { c: 1.0, exponent: -1.0, radius: 1.0 },
            radius: rho,
        }),
        Certificate::Concave,
    ))
}

/// `u_ε`, solving `k u′/r − b u′ + u^{−γ} = 0` on `[0, k/b − ε]`.
pub fn drift_nonexistence_profile(k: usize, gamma: f64, b: f64, eps: f64) -> Result<RadialProfile, BarrierError> {
    positive("b", b)?;
    positive("γ", gamma)?;
    let limit = k as f64 / b;
    if !(eps > 0.0 && eps < limit) {
        return Err(BarrierError::BadEpsilon { eps, limit });
    }
    Ok(RadialProfile::closed(
        ClosedForm::DriftBlowup { k: k as f64, gamma, b, eps },
        Some(RadialOdeSpec::FirstOrderK {
            k,
            gamma,
            b,
            sign: -1.0,
            weight: RadialWeight::Constant { c: 1.0 },
            radius: limit - eps,
        }),
        Certificate::Concave,
    ))
}

fn check_drift_ball(beta: f64, b: f64, k: usize, radius: f64) -> Result<(), BarrierError> {
    if beta <= -1.0 {
        return Err(regime(format!("β = {beta} ≤ −1: singular weight nonexistence regime")));
    }
    if b * radius >= k as f64 {
        return Err(regime(format!(
            "bR ≥ k: drift nonexistence regime (bR = {}, k = {k})",
            b * radius
        )));
    }
    positive("b", b)?;
    positive("R", radius)
}

/// Log closed form `[c₂R^β(1+γ)/b (r − R + (k/b) ln((k−br)/(k−bR)))]^{1/(1+γ)}`.
pub fn drift_ball_log_form(
    c2: f64,
    k: usize,
    gamma: f64,
    beta: f64,
    b: f64,
    radius: f64,
) -> Result<RadialProfile, BarrierError> {
    check_drift_ball(beta, b, k, radius)?;
    positive("c₂", c2)?;
    positive("γ", gamma)?;
    Ok(RadialProfile::closed(
        ClosedForm::DriftBallLog { c2, k: k as f64, gamma, beta, b, radius },
        Some(RadialOdeSpec::FirstOrderK {
            k,
            gamma,
            b,
            sign: -1.0,
            weight: RadialWeight::Constant { c: c2 * radius.powf(beta) },
            radius,
        }),
        Certificate::Concave,
    ))
}

/// Integral form `[c₂(1+γ) ∫_r^R s(R−s)^β/(k−bs) ds]^{1/(1+γ)}`.
pub fn drift_ball_integral_form(
    c2: f64,
    k: usize,
    gamma: f64,
    beta: f64,
    b: f64,
    radius: f64,
) -> Result<RadialProfile, BarrierError> {
    check_drift_ball(beta, b, k, radius)?;
    positive("c₂", c2)?;
    positive("γ", gamma)?;
    Ok(RadialProfile::closed(
        ClosedForm::DriftBallIntegral { c2, k: k as f64, gamma, beta, b, radius },
        Some(RadialOdeSpec::FirstOrderK {
            k,
            gamma,
            b,
            sign: -1.0,
            weight: RadialWeight::DistancePower { c: c2, exponent: beta, radius },
            radius,
        }),
        Certificate::Concave,
    ))
}

/// Supersolution of `𝒫⁺ₖ + b|Du| + c₂(R−r)^β u^{−γ} = 0` in `B_R` for `bR < k`:
/// the integral form (an exact solution) for `β ∈ (−1, 0]`, the log form for `β > 0`.
pub fn drift_ball_supersolution(
    c2: f64,
    k: usize,
    gamma: f64,
    beta: f64,
    b: f64,
    radius: f64,
) -> Result<RadialProfile, BarrierError> {
    if beta <= 0.0 {
        drift_ball_integral_form(c2, k, gamma, beta, b, radius)
    } else {
        drift_ball_log_form(c2, k, gamma, beta, b, radius)
    }
}

/// `[(1+γ)R/(kα(α+1)) (R−r)^α (R+αr)]^{1/(1+γ)}`, solving
/// `k u′/r − (k/R) u′ + (R−r)^α u^{−γ} = 0`: the `+b|Du|` problem at `bR = k`.
pub fn br_equals_k_solution(alpha: f64, gamma: f64, k: usize, radius: f64) -> Result<RadialProfile, BarrierError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(regime(format!("α = {alpha} outside (0, 1)")));
    }
    positive("γ", gamma)?;
    positive("R", radius)?;
    Ok(RadialProfile::closed(
        ClosedForm::Threshold { alpha, gamma, k: k as f64, radius },
        Some(RadialOdeSpec::FirstOrderK {
            k,
            gamma,
            b: k as f64 / radius,
            sign: -1.0,
            weight: RadialWeight::DistancePower { c: 1.0, exponent: alpha, radius },
            radius,
        }),
        Certificate::Concave,
    ))
}

/// `[(1+γ)/(k(1+α)) (1−r)^{α+1}(r + (1−r)/(α+2))]^{1/(1+γ)}` on the unit ball,
/// solving `k u′/r + (1−r)^α u^{−γ} = 0`. Here `u″ ≥ u′/r`, so the radial
/// function solves the lower partial sums with `k < N`.
pub fn partial_sum_alpha_solution(alpha: f64, gamma: f64, k: usize) -> Result<RadialProfile, BarrierError> {
    positive("γ", gamma)?;
    if alpha < gamma {
        return Err(regime(format!("α = {alpha} < γ = {gamma}")));
    }
    Ok(RadialProfile::closed(
        ClosedForm::AlphaSolution { alpha, gamma, k: k as f64 },
        Some(RadialOdeSpec::FirstOrderK {
            k,
            gamma,
            b: 0.0,
            sign: 0.0,
            weight: RadialWeight::DistancePower { c: 1.0, exponent: alpha, radius: 1.0 },
            radius: 1.0,
        }),
        Certificate::Convex,
    ))
}

/// `w(r) = [(1+γ) ∫_r^ρ s(R−s)^β/(k+bs) ds]^{1/(1+γ)}` on `[0, ρ]`, `ρ < R`,
/// solving `k w′/r + b w′ + (R−r)^β w^{−γ} = 0`: the `−b|Du|` blow-up family.
pub fn drift_blowup_integral_profile(
    k: usize,
    gamma: f64,
    beta: f64,
    b: f64,
    radius: f64,
    rho: f64,
) -> Result<RadialProfile, BarrierError> {
    positive("γ", gamma)?;
    positive("R", radius)?;
    if !(b >= 0.0) {
        return Err(BarrierError::BadParameter(format!("b = {b} must be ≥ 0")));
    }
    if !(rho > 0.0 && rho < radius) {
        return Err(BarrierError::BadParameter(format!("ρ = {rho} outside (0, R)")));
    }
    Ok(RadialProfile::closed(
        ClosedForm::DriftBlowupIntegral { k: k as f64, gamma, beta, b, radius, rho },
        Some(RadialOdeSpec::FirstOrderK {
            k,
            gamma,
            b,
            sign: 1.0,
            weight: RadialWeight::DistancePower { c: 1.0, exponent: beta, radius },
            radius: rho,
        }),
        Certificate::Concave,
    ))
}

/// `u̲ = ε d^t` with `t = (α+2)/(γ+1)`.
#[derive(Clone, Debug, Serialize)]
pub struct SubsolutionField {
    pub eps: f64,
    pub t: f64,
    pub smoothing: f64,
    pub constants: DistanceConstants,
    #[serde(skip)]
    domain: BallDomain,
}

impl SubsolutionField {
    pub fn domain(&self) -> &BallDomain {
        &self.domain
    }

    /// `ε d(x)^t`, or 0 off the interior.
    pub fn value(&self, x: &[f64]) -> f64 {
        match geometry::regularized_distance(&self.domain, x, self.smoothing) {
            Ok(b) => self.eps * b.d.powf(self.t),
            Err(_) => 0.0,
        }
    }

    /// Value, gradient and Hessian at an interior point:
    /// `D²u̲ = εt d^{t−2}((t−1)∇d⊗∇d + d D²d)`.
    pub fn jet(&self, x: &[f64]) -> Result<(f64, Vec<f64>, SymMatrix), GeometryError> {
        let b = geometry::regularized_distance(&self.domain, x, self.smoothing)?;
        let (eps, t, d) = (self.eps, self.t, b.d);
        let u = eps * d.powf(t);
        let grad = b.grad_d.iter().map(|g| eps * t * d.powf(t - 1.0) * g).collect();
        let hess = SymMatrix::outer(&b.grad_d)
            .scale(t - 1.0)
            .add(&b.hess_d.scale(d))
            .scale(eps * t * d.powf(t - 2.0));
        Ok((u, grad, hess))
    }

    /// Returns a copy with `ε` multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut s = self.clone();
        s.eps *= factor;
        s
    }
}

/// Builds `u̲ = ε d^t`. With measured `B₁ = max|∇d|`, `B₂ = max δ‖D²d‖` and
/// `C₁ ≤ d/δ ≤ C₂`,
///
/// ```text
/// F(D²u̲) + H + p u̲^{−γ} ≥ ε t d^{t−2} (−K) + c₁ C_*^{−α} ε^{−γ} d^{−γt} d^α
/// K = |t−1| B₁² + k C₂ B₂ + b B₁ C₂ δ_max,
/// ```
///
/// so `ε = min(1, ½ (c₁ C_*^{−α} / (t K))^{1/(γ+1)})` with `C_* = C₂` for
/// `α ≥ 0` and `C₁` otherwise.
pub fn subsolution_field(spec: &ProblemSpec, smoothing: f64) -> Result<SubsolutionField, BarrierError> {
    spec.validate()?;
    if spec.beta <= -1.0 {
        return Err(regime(format!(
            "β = {} ≤ −1: singular weight nonexistence regime",
            spec.beta
        )));
    }
    positive("smoothing", smoothing)?;
    let domain = &spec.domain;
    let constants = geometry::estimate_constants(domain, smoothing, CONSTANT_SAMPLES, 0)?;
    let delta_max = domain.max_delta_estimate(CONSTANT_SAMPLES, 1);
    let t = (spec.alpha + 2.0) / (spec.gamma + 1.0);
    let k = spec.lower_rank() as f64;
    let mut big_k = (t - 1.0).abs() * constants.b1.powi(2) + k * constants.c2 * constants.b2;
    if spec.drift_sign != 0 {
        big_k += spec.drift_b * constants.b1 * constants.c2 * delta_max;
    }
    let c_star = if spec.alpha >= 0.0 { constants.c2 } else { constants.c1 };
    let ratio = spec.c1 * c_star.powf(-spec.alpha) / (t * big_k);
    let eps = (0.5 * ratio.powf(1.0 / (spec.gamma + 1.0))).min(1.0);
    Ok(SubsolutionField {
        eps,
        t,
        smoothing,
        constants,
        domain: domain.clone(),
    })
}

/// `ū(x) = min_y u_y(|x − y|)` over the centers of Ω.
#[derive(Clone, Debug)]
pub struct InfBallSupersolution {
    pub profile: RadialProfile,
    domain: BallDomain,
}

impl InfBallSupersolution {
    pub fn value(&self, x: &[f64]) -> f64 {
        let i = geometry::nearest_boundary_ball(&self.domain, x);
        let y = &self.domain.centers()[i];
        let r = x
            .iter()
            .zip(y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        self.profile.value(r)
    }

    pub fn domain(&self) -> &BallDomain {
        &self.domain
    }
}

/// The per-ball supersolution used in the inf over `Y`.
pub fn ball_barrier_profile(spec: &ProblemSpec) -> Result<RadialProfile, BarrierError> {
    spec.validate()?;
    let r = spec.domain.radius();
    let k = spec.k;
    if spec.beta <= -1.0 {
        return Err(regime(format!(
            "β = {} ≤ −1: singular weight nonexistence regime",
            spec.beta
        )));
    }
    if spec.drift_sign > 0 && spec.drift_b > 0.0 {
        drift_ball_supersolution(spec.c2, k, spec.gamma, spec.beta, spec.drift_b, r)
    } else if spec.beta <= 0.0 {
        ball_solution_beta_nonpos(spec.c2, k, spec.gamma, spec.beta, r)
    } else {
        ball_supersolution_beta_pos(spec.c2, k, spec.gamma, spec.beta, r)
    }
}

/// `ū = inf_y u_y(|x−y|)`. The minimizing center is the one nearest to the
/// boundary, since every `u_y` decreases in `|x − y|`.
pub fn inf_ball_supersolution(spec: &ProblemSpec) -> Result<InfBallSupersolution, BarrierError> {
    Ok(InfBallSupersolution {
        profile: ball_barrier_profile(spec)?,
        domain: spec.domain.clone(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentReport {
    pub sigma: f64,
    /// `(α+2)/(γ+1)`, or `σ` when the two-sided estimate applies.
    pub lower_exponent: f64,
    /// `(α+2)/(γ+1)`.
    pub corollary_lower_exponent: f64,
    /// Upper partial sum with `β ≤ 0`: `a₁δ^σ ≤ u ≤ a₂δ^σ`.
    pub two_sided_sigma: bool,
    /// `min u̲/δ^{(α+2)/(γ+1)}` over samples.
    pub a1: f64,
    /// `max ū/δ^σ` over samples.
    pub a2: f64,
}

/// Boundary exponents, with `a₁`, `a₂` measured from the barriers.
pub fn boundary_estimate(spec: &ProblemSpec) -> Result<ExponentReport, BarrierError> {
    let sigma = holder_exponent(spec.gamma, spec.beta)?;
    let corollary = (spec.alpha + 2.0) / (spec.gamma + 1.0);
    let two_sided = matches!(spec.operator, OperatorSpec::UpperPartialSum { .. }) && spec.beta <= 0.0;
    let sub = subsolution_field(spec, spec.smoothing())?;
    let sup = inf_ball_supersolution(spec)?;
    let mut rng = <rand_chacha::ChaCha8Rng as rand_chacha::rand_core::SeedableRng>::seed_from_u64(2);
    let mut a1 = f64::INFINITY;
    let mut a2: f64 = 0.0;
    for x in geometry::sample_interior(&spec.domain, 1000, &mut rng) {
        let d = geometry::delta(&spec.domain, &x);
        a1 = a1.min(sub.value(&x) / d.powf(corollary));
        a2 = a2.max(sup.value(&x) / d.powf(sigma));
    }
    Ok(ExponentReport {
        sigma,
        lower_exponent: if two_sided { sigma } else { corollary },
        corollary_lower_exponent: corollary,
        two_sided_sigma: two_sided,
        a1,
        a2,
    })
}
