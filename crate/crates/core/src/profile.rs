//! Radial profiles `r ↦ u(r)` with derivative queries.
//!
//! Every closed form here has the shape `u = G^{1/(1+γ)}` for an explicit `G`
//! with `G(support) = 0`, so derivatives follow from `G′` and `G″`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::quadrature::integrate;
use crate::radial_ode::RadialOdeSpec;

const QUAD_TOL: f64 = 1e-13;

/// Which side of `u″ = u′/r` the profile lies on, when it is known.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    /// `u″ ≤ u′/r`: the top eigenvalue of the Hessian is `u′/r`.
    Concave,
    /// `u″ ≥ u′/r`.
    Convex,
    None,
}

/// `ln(1+x) − x`, accurate for small `x`.
fn log1p_minus_x(x: f64) -> f64 {
    if x.abs() < 0.1 {
        let mut term = x;
        let mut sum = 0.0;
        for n in 2..40 {
            term *= -x;
            sum += term / n as f64;
        }
        sum
    } else {
        x.ln_1p() - x
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ClosedForm {
    /// `C(R t^{β+1}/(β+1) − t^{β+2}/(β+2))`, `t = R − r`, `C = c₂(1+γ)/k`.
    BallNonpos { c2: f64, k: f64, gamma: f64, beta: f64, radius: f64 },
    /// `C(R² − r²)`, `C = c₂R^β(1+γ)/(2k)`.
    BallPos { c2: f64, k: f64, gamma: f64, beta: f64, radius: f64 },
    /// `(1+γ)/k (r − ρ + ln((1−r)/(1−ρ)))` on `[0, ρ]`.
    Blowup { k: f64, gamma: f64, rho: f64 },
    /// `(1+γ)/b (r − k/b + ε + (k/b) ln((k−br)/(εb)))` on `[0, k/b − ε]`.
    DriftBlowup { k: f64, gamma: f64, b: f64, eps: f64 },
    /// `C(r − R + (k/b) ln((k−br)/(k−bR)))`, `C = c₂R^β(1+γ)/b`.
    DriftBallLog { c2: f64, k: f64, gamma: f64, beta: f64, b: f64, radius: f64 },
    /// `c₂(1+γ) ∫_r^R s(R−s)^β/(k−bs) ds`.
    DriftBallIntegral { c2: f64, k: f64, gamma: f64, beta: f64, b: f64, radius: f64 },
    /// `(1+γ)R/(kα(α+1)) (R−r)^α (R + αr)`.
    Threshold { alpha: f64, gamma: f64, k: f64, radius: f64 },
    /// `(1+γ)/(k(1+α)) (1−r)^{α+1} (r + (1−r)/(α+2))` on the unit ball.
    AlphaSolution { alpha: f64, gamma: f64, k: f64 },
    /// `(1+γ) ∫_r^ρ s(R−s)^β/(k+bs) ds` on `[0, ρ]`, `ρ < R`.
    DriftBlowupIntegral { k: f64, gamma: f64, beta: f64, b: f64, radius: f64, rho: f64 },
}

impl ClosedForm {
    pub fn gamma(&self) -> f64 {
        match *self {
            ClosedForm::BallNonpos { gamma, .. }
            | ClosedForm::BallPos { gamma, .. }
            | ClosedForm::Blowup { gamma, .. }
            | ClosedForm::DriftBlowup { gamma, .. }
            | ClosedForm::DriftBallLog { gamma, .. }
            | ClosedForm::DriftBallIntegral { gamma, .. }
            | ClosedForm::Threshold { gamma, .. }
            | ClosedForm::AlphaSolution { gamma, .. }
            | ClosedForm::DriftBlowupIntegral { gamma, .. } => gamma,
        }
    }

    /// Radius at which `G` vanishes.
    pub fn support(&self) -> f64 {
        match *self {
            ClosedForm::BallNonpos { radius, .. }
            | ClosedForm::BallPos { radius, .. }
            | ClosedForm::DriftBallLog { radius, .. }
            | ClosedForm::DriftBallIntegral { radius, .. }
            | ClosedForm::Threshold { radius, .. } => radius,
            ClosedForm::Blowup { rho, .. } | ClosedForm::DriftBlowupIntegral { rho, .. } => rho,
            ClosedForm::DriftBlowup { k, b, eps, .. } => k / b - eps,
            ClosedForm::AlphaSolution { .. } => 1.0,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            ClosedForm::BallNonpos { .. } => "ball_solution_beta_nonpos",
            ClosedForm::BallPos { .. } => "ball_supersolution_beta_pos",
            ClosedForm::Blowup { .. } => "nonexistence_profile",
            ClosedForm::DriftBlowup { .. } => "drift_nonexistence_profile",
            ClosedForm::DriftBallLog { .. } => "drift_ball_supersolution_log",
            ClosedForm::DriftBallIntegral { .. } => "drift_ball_supersolution_integral",
            ClosedForm::Threshold { .. } => "br_equals_k_solution",
            ClosedForm::AlphaSolution { .. } => "partial_sum_alpha_solution",
            ClosedForm::DriftBlowupIntegral { .. } => "drift_blowup_integral_profile",
        }
    }

    fn params(&self) -> BTreeMap<String, f64> {
        let v = serde_json::to_value(self).expect("closed form serializes");
        v.as_object()
            .unwrap()
            .iter()
            .filter_map(|(k, v)| v.as_f64().map(|x| (k.clone(), x)))
            .collect()
    }

    /// `(G, G′, G″)` at `0 ≤ r ≤ support`.
    fn g(&self, r: f64) -> (f64, f64, f64) {
        match *self {
            ClosedForm::BallNonpos { c2, k, gamma, beta, radius } => {
                let c = c2 * (1.0 + gamma) / k;
                let t = radius - r;
                let g = c * t.powf(beta + 1.0) * (radius / (beta + 1.0) - t / (beta + 2.0));
                let g1 = -c * r * t.powf(beta);
                let g2 = -c * t.powf(beta - 1.0) * (t - beta * r);
                (g, g1, g2)
            }
            ClosedForm::BallPos { c2, k, gamma, beta, radius } => {
                let c = c2 * radius.powf(beta) * (1.0 + gamma) / (2.0 * k);
                (c * (radius - r) * (radius + r), -2.0 * c * r, -2.0 * c)
            }
            ClosedForm::Blowup { k, gamma, rho } => {
                let c = (1.0 + gamma) / k;
                let x = (rho - r) / (1.0 - rho);
                let g = c * (rho * x + log1p_minus_x(x));
                (g, -c * r / (1.0 - r), -c / (1.0 - r).powi(2))
            }
            ClosedForm::DriftBlowup { k, gamma, b, eps } => {
                let c = (1.0 + gamma) / b;
                let x = (k / b - eps - r) / eps;
                let g = c * ((k / b - eps) * x + (k / b) * log1p_minus_x(x));
                let m = k - b * r;
                (g, -c * b * r / m, -c * b * k / (m * m))
            }
            ClosedForm::DriftBallLog { c2, k, gamma, beta, b, radius } => {
                let c = c2 * radius.powf(beta) * (1.0 + gamma) / b;
                let x = b * (radius - r) / (k - b * radius);
                let g = c * (radius * x + (k / b) * log1p_minus_x(x));
                let m = k - b * r;
                (g, -c * b * r / m, -c * b * k / (m * m))
            }
            ClosedForm::DriftBallIntegral { c2, k, gamma, beta, b, radius } => {
                let c = c2 * (1.0 + gamma);
                let t = radius - r;
                let m = k - b * r;
                let integral = if beta < 0.0 {
                    // τ = (R−s)^{β+1} removes the endpoint singularity
                    let e = 1.0 / (beta + 1.0);
                    let upper = t.powf(beta + 1.0);
                    e * integrate(
                        |tau: f64| {
                            let s = radius - tau.powf(e);
                            s / (k - b * s)
                        },
                        0.0,
                        upper,
                        QUAD_TOL,
                    )
                } else {
                    integrate(
                        |s: f64| s * (radius - s).powf(beta) / (k - b * s),
                        r,
                        radius,
                        QUAD_TOL,
                    )
                };
                let g1 = -c * r * t.powf(beta) / m;
                let g2 = -c
                    * (t.powf(beta) / m - beta * r * t.powf(beta - 1.0) / m
                        + b * r * t.powf(beta) / (m * m));
                (c * integral, g1, g2)
            }
            ClosedForm::Threshold { alpha, gamma, k, radius } => {
                let t = radius - r;
                let c = (1.0 + gamma) * radius / k;
                let g = c / (alpha * (alpha + 1.0)) * t.powf(alpha) * (radius + alpha * r);
                let g1 = -c * r * t.powf(alpha - 1.0);
                let g2 = -c * (t.powf(alpha - 1.0) - (alpha - 1.0) * r * t.powf(alpha - 2.0));
                (g, g1, g2)
            }
            ClosedForm::AlphaSolution { alpha, gamma, k } => {
                let t = 1.0 - r;
                let c = (1.0 + gamma) / k;
                let g = c / (1.0 + alpha) * t.powf(alpha + 1.0) * (r + t / (alpha + 2.0));
                let g1 = -c * r * t.powf(alpha);
                let g2 = -c * (t.powf(alpha) - alpha * r * t.powf(alpha - 1.0));
                (g, g1, g2)
            }
            ClosedForm::DriftBlowupIntegral { k, gamma, beta, b, radius, rho } => {
                let c = 1.0 + gamma;
                let integral = integrate(
                    |s: f64| s * (radius - s).powf(beta) / (k + b * s),
                    r,
                    rho,
                    QUAD_TOL,
                );
                let t = radius - r;
                let m = k + b * r;
                let g1 = -c * r * t.powf(beta) / m;
                let g2 = -c
                    * (t.powf(beta) / m - beta * r * t.powf(beta - 1.0) / m
                        - b * r * t.powf(beta) / (m * m));
                (c * integral, g1, g2)
            }
        }
    }

    fn eval(&self, r: f64) -> (f64, f64, f64) {
        let support = self.support();
        if r >= support {
            return (0.0, 0.0, 0.0);
        }
        let q = 1.0 / (1.0 + self.gamma());
        let (g, g1, g2) = self.g(r.max(0.0));
        let u = g.powf(q);
        let gq1 = g.powf(q - 1.0);
        let du = q * gq1 * g1;
        let d2u = q * (q - 1.0) * g.powf(q - 2.0) * g1 * g1 + q * gq1 * g2;
        (u, du, d2u)
    }
}

/// Knot table `(r, u, u′, u″)` interpolated by quintic Hermite splines.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HermiteTable {
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    pub d2u: Vec<f64>,
}

impl HermiteTable {
    fn eval(&self, r: f64) -> (f64, f64, f64) {
        let n = self.r.len();
        if r >= self.r[n - 1] {
            return (0.0, 0.0, 0.0);
        }
        let r = r.max(self.r[0]);
        let i = match self.r.partition_point(|&x| x <= r) {
            0 => 0,
            p => (p - 1).min(n - 2),
        };
        let dx = self.r[i + 1] - self.r[i];
        let t = (r - self.r[i]) / dx;
        let (t2, t3, t4, t5) = (t * t, t * t * t, t.powi(4), t.powi(5));
        let h = [
            1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5,
            t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5,
            0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5),
            0.5 * (t3 - 2.0 * t4 + t5),
            -4.0 * t3 + 7.0 * t4 - 3.0 * t5,
            10.0 * t3 - 15.0 * t4 + 6.0 * t5,
        ];
        let h1 = [
            -30.0 * t2 + 60.0 * t3 - 30.0 * t4,
            1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4,
            0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4),
            0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4),
            -12.0 * t2 + 28.0 * t3 - 15.0 * t4,
            30.0 * t2 - 60.0 * t3 + 30.0 * t4,
        ];
        let h2 = [
            -60.0 * t + 180.0 * t2 - 120.0 * t3,
            -36.0 * t + 96.0 * t2 - 60.0 * t3,
            0.5 * (2.0 - 18.0 * t + 36.0 * t2 - 20.0 * t3),
            0.5 * (6.0 * t - 24.0 * t2 + 20.0 * t3),
            -24.0 * t + 84.0 * t2 - 60.0 * t3,
            60.0 * t - 180.0 * t2 + 120.0 * t3,
        ];
        let c = [
            self.u[i],
            dx * self.du[i],
            dx * dx * self.d2u[i],
            dx * dx * self.d2u[i + 1],
            dx * self.du[i + 1],
            self.u[i + 1],
        ];
        let dot = |w: &[f64; 6]| w.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
        (dot(&h), dot(&h1) / dx, dot(&h2) / (dx * dx))
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Shape {
    Closed(ClosedForm),
    Table(HermiteTable),
    Custom(ScalarFn),
}

/// A radial function on `[0, support]` (zero beyond).
#[derive(Clone)]
pub struct RadialProfile {
    name: String,
    support: f64,
    shape: Shape,
    ode: Option<RadialOdeSpec>,
    certificate: Certificate,
    params: BTreeMap<String, f64>,
}

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialProfile")
            .field("name", &self.name)
            .field("support", &self.support)
            .field("params", &self.params)
            .finish()
    }
}

/// Serializable description of a profile (formula tag and parameters).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfileRecord {
    pub name: String,
    pub support: f64,
    pub certificate: Certificate,
    pub params: BTreeMap<String, f64>,
}

impl RadialProfile {
    pub fn closed(form: ClosedForm, ode: Option<RadialOdeSpec>, certificate: Certificate) -> Self {
        Self {
            name: form.name().to_string(),
            support: form.support(),
            params: form.params(),
            shape: Shape::Closed(form),
            ode,
            certificate,
        }
    }

    pub fn table(
        name: impl Into<String>,
        table: HermiteTable,
        ode: Option<RadialOdeSpec>,
        certificate: Certificate,
        params: BTreeMap<String, f64>,
    ) -> Self {
        Self {
            name: name.into(),
            support: *table.r.last().expect("nonempty table"),
            shape: Shape::Table(table),
            ode,
            certificate,
            params,
        }
    }

    /// A profile given by an arbitrary function; derivatives are taken by
    /// five-point central differences.
    pub fn custom<F>(name: impl Into<String>, support: f64, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            support,
            shape: Shape::Custom(Arc::new(f)),
            ode: None,
            certificate: Certificate::None,
            params: BTreeMap::new(),
        }
    }

    pub fn with_ode(mut self, ode: RadialOdeSpec) -> Self {
        self.ode = Some(ode);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Radius where the profile vanishes (`R`, `ρ` or `k/b − ε`).
    pub fn support(&self) -> f64 {
        self.support
    }

    pub fn ode(&self) -> Option<&RadialOdeSpec> {
        self.ode.as_ref()
    }

    pub fn certificate(&self) -> Certificate {
        self.certificate
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn closed_form(&self) -> Option<&ClosedForm> {
        match &self.shape {
            Shape::Closed(c) => Some(c),
            _ => None,
        }
    }

    pub fn table_data(&self) -> Option<&HermiteTable> {
        match &self.shape {
            Shape::Table(t) => Some(t),
            _ => None,
        }
    }

    pub fn record(&self) -> ProfileRecord {
        ProfileRecord {
            name: self.name.clone(),
            support: self.support,
            certificate: self.certificate,
            params: self.params.clone(),
        }
    }

    /// `(u, u′, u″)` at `r ≥ 0`.
    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        match &self.shape {
            Shape::Closed(c) => c.eval(r),
            Shape::Table(t) => t.eval(r),
            Shape::Custom(f) => {
                let g = |s: f64| f(s.abs());
                let h1 = 1e-3 * self.support;
                let h2 = 2e-3 * self.support;
                let d1 = (-g(r + 2.0 * h1) + 8.0 * g(r + h1) - 8.0 * g(r - h1) + g(r - 2.0 * h1))
                    / (12.0 * h1);
                let d2 = (-g(r + 2.0 * h2) + 16.0 * g(r + h2) - 30.0 * g(r) + 16.0 * g(r - h2)
                    - g(r - 2.0 * h2))
                    / (12.0 * h2 * h2);
                (g(r), d1, d2)
            }
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        match &self.shape {
            Shape::Closed(c) => {
                if r >= c.support() {
                    0.0
                } else {
                    let (g, _, _) = c.g(r.max(0.0));
                    g.powf(1.0 / (1.0 + c.gamma()))
                }
            }
            Shape::Custom(f) => f(r.abs()),
            Shape::Table(_) => self.eval(r).0,
        }
    }

    pub fn d1(&self, r: f64) -> f64 {
        self.eval(r).1
    }

    pub fn d2(&self, r: f64) -> f64 {
        self.eval(r).2
    }

    /// Writes `r,u,du,d2u,residual` on `n` equispaced points of `[0, support]`.
    /// The residual column is empty when no defining ODE is attached.
    pub fn write_csv<W: Write>(&self, mut w: W, n: usize) -> std::io::Result<()> {
        writeln!(w, "r,u,du,d2u,residual")?;
        for i in 0..n {
            let r = self.support * i as f64 / (n - 1).max(1) as f64;
            let (u, du, d2u) = self.eval(r);
            let res = self
                .ode
                .as_ref()
                .filter(|_| r > 0.0 && r < self.support)
                .map(|o| format!("{:e}", o.pointwise_residual(r, u, du, d2u)))
                .unwrap_or_default();
            writeln!(w, "{r},{u},{du},{d2u},{res}")?;
        }
        Ok(())
    }
}
