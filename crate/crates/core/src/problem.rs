//! Problem instances: operator, singular exponent, weight and drift.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{default_smoothing, BallDomain};
use crate::operators::{OperatorError, OperatorSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    /// `p(x) = c₂ δ(x)^β`.
    PowerOfDelta,
    /// `p(x) ≡ c₂`; requires `β = 0`.
    Constant,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("{field}: {message}")]
    Field {
        field: &'static str,
        message: String,
    },
    #[error("operator: {0}")]
    Operator(#[from] OperatorError),
}

fn field(field: &'static str, message: impl Into<String>) -> ProblemError {
    ProblemError::Field {
        field,
        message: message.into(),
    }
}

/// A parameter set outside the regime where the requested construction exists.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct RegimeError(pub String);

fn default_weight() -> WeightKind {
    WeightKind::PowerOfDelta
}

/// `F(D²u) + s·b|Du| + p(x)u^{−γ} = 0` in Ω, `u = 0` on ∂Ω, with
/// `c₁δ^α ≤ p ≤ c₂δ^β`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub operator: OperatorSpec,
    pub k: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub c1: f64,
    pub c2: f64,
    #[serde(default)]
    pub drift_b: f64,
    /// `+1`: `+b|Du|`, `−1`: `−b|Du|`, `0`: no drift.
    #[serde(default)]
    pub drift_sign: i8,
    pub domain: BallDomain,
    #[serde(default = "default_weight")]
    pub weight_kind: WeightKind,
    /// Regularized-distance smoothing length; defaults to `10⁻³·R`.
    #[serde(default)]
    pub smoothing: Option<f64>,
}

impl ProblemSpec {
    /// `𝒫⁺ₖ`, `p ≡ c`, no drift.
    pub fn upper_constant(domain: BallDomain, k: usize, gamma: f64, c: f64) -> Self {
        Self {
            operator: OperatorSpec::UpperPartialSum { k },
            k,
            gamma,
            alpha: 0.0,
            beta: 0.0,
            c1: c,
            c2: c,
            drift_b: 0.0,
            drift_sign: 0,
            domain,
            weight_kind: WeightKind::Constant,
            smoothing: None,
        }
    }

    /// `𝒫⁺ₖ`, `p = c δ^β`, no drift.
    pub fn upper_power(domain: BallDomain, k: usize, gamma: f64, beta: f64, c: f64) -> Self {
        Self {
            operator: OperatorSpec::UpperPartialSum { k },
            k,
            gamma,
            alpha: beta,
            beta,
            c1: c,
            c2: c,
            drift_b: 0.0,
            drift_sign: 0,
            domain,
            weight_kind: WeightKind::PowerOfDelta,
            smoothing: None,
        }
    }

    pub fn with_drift(mut self, b: f64, sign: i8) -> Self {
        self.drift_b = b;
        self.drift_sign = sign;
        self
    }

    pub fn dimension(&self) -> usize {
        self.domain.dimension()
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
            .unwrap_or_else(|| default_smoothing(&self.domain))
    }

    /// Signed drift coefficient `s·b`.
    pub fn drift(&self) -> f64 {
        f64::from(self.drift_sign) * self.drift_b
    }

    /// The rank used for the lower bound `F ≥ 𝒫⁻ₖ`. The minimal-surface
    /// operator is a trace against a matrix in `[0, I]`, so `F ≥ 𝒫⁻_N` there.
    pub fn lower_rank(&self) -> usize {
        match self.operator {
            OperatorSpec::MinimalSurface => self.dimension(),
            _ => self.k,
        }
    }

    /// `p(x)` as a function of `δ(x)`.
    pub fn weight(&self, delta: f64) -> f64 {
        match self.weight_kind {
            WeightKind::PowerOfDelta => self.c2 * delta.powf(self.beta),
            WeightKind::Constant => self.c2,
        }
    }

    /// Structural validity of every field.
    pub fn validate(&self) -> Result<(), ProblemError> {
        let n = self.dimension();
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(field("gamma", format!("must be positive, got {}", self.gamma)));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !v.is_finite() {
                return Err(field(name, "must be finite"));
            }
        }
        if self.alpha < self.beta {
            return Err(field(
                "alpha",
                format!("growth condition needs α ≥ β, got α = {} < β = {}", self.alpha, self.beta),
            ));
        }
        if !(self.c1 > 0.0 && self.c2 > 0.0) {
            return Err(field("c1", "weight constants must be positive"));
        }
        if self.alpha == self.beta && self.c1 > self.c2 {
            return Err(field("c1", format!("c₁ = {} > c₂ = {} with α = β", self.c1, self.c2)));
        }
        if !(self.drift_b >= 0.0 && self.drift_b.is_finite()) {
            return Err(field("drift_b", format!("must be ≥ 0, got {}", self.drift_b)));
        }
        if !matches!(self.drift_sign, -1..=1) {
            return Err(field("drift_sign", format!("must be −1, 0 or 1, got {}", self.drift_sign)));
        }
        if self.weight_kind == WeightKind::Constant && self.beta != 0.0 {
            return Err(field("weight_kind", "constant weight requires β = 0"));
        }
        if let Some(s) = self.smoothing {
            if !(s > 0.0 && s.is_finite()) {
                return Err(field("smoothing", format!("must be positive, got {s}")));
            }
        }
        if self.k == 0 || self.k > n {
            return Err(field("k", format!("must lie in [1, {n}], got {}", self.k)));
        }
        self.operator.validate(n)?;
        if let Some(k) = self.operator.declared_k(n) {
            if k != self.k {
                return Err(field("k", format!("operator declares k = {k}, spec has {}", self.k)));
            }
        }
        Ok(())
    }

    /// The lower growth bound `c₁δ^α ≤ p(x)` on `δ ∈ (0, δ_max]`.
    pub fn check_growth(&self, delta_max: f64) -> Result<(), ProblemError> {
        let lhs = self.c1 * delta_max.powf(self.alpha - self.beta);
        if lhs > self.c2 * (1.0 + 1e-12) {
            return Err(field(
                "c1",
                format!("c₁ δ_max^(α−β) = {lhs} exceeds c₂ = {}", self.c2),
            ));
        }
        Ok(())
    }

    /// Errors when the parameters fall in a nonexistence regime.
    pub fn existence_regime(&self) -> Result<(), RegimeError> {
        if self.beta <= -1.0 {
            return Err(RegimeError(format!(
                "β = {} ≤ −1: singular weight nonexistence regime",
                self.beta
            )));
        }
        if self.drift_sign > 0 && self.drift_b > 0.0 {
            let br = self.drift_b * self.domain.radius();
            if br >= self.k as f64 {
                return Err(RegimeError(format!(
                    "bR ≥ k: drift nonexistence regime (bR = {br}, k = {})",
                    self.k
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk() -> BallDomain {
        BallDomain::ball(1.0, 2).unwrap()
    }

    #[test]
    fn validates_basic() {
        let p = ProblemSpec::upper_constant(disk(), 1, 1.0, 1.0);
        p.validate().unwrap();
        assert!(p.existence_regime().is_ok());
    }

    #[test]
    fn rejects_alpha_below_beta() {
        let mut p = ProblemSpec::upper_power(disk(), 1, 1.0, 0.5, 1.0);
        p.alpha = 0.0;
        assert!(matches!(p.validate(), Err(ProblemError::Field { field: "alpha", .. })));
    }

    #[test]
    fn regime_messages() {
        let p = ProblemSpec::upper_power(disk(), 1, 1.0, -1.0, 1.0);
        assert!(p.existence_regime().unwrap_err().0.contains("β"));
        let p = ProblemSpec::upper_constant(disk(), 1, 1.0, 1.0).with_drift(1.0, 1);
        assert!(p.existence_regime().unwrap_err().0.starts_with("bR ≥ k"));
        let p = ProblemSpec::upper_constant(disk(), 1, 1.0, 1.0).with_drift(5.0, -1);
        assert!(p.existence_regime().is_ok());
    }

    #[test]
    fn k_must_match_operator() {
        let mut p = ProblemSpec::upper_constant(disk(), 1, 1.0, 1.0);
        p.k = 2;
        assert!(p.validate().is_err());
    }

    #[test]
    fn growth_check() {
        let mut p = ProblemSpec::upper_power(disk(), 1, 1.0, 0.0, 1.0);
        p.alpha = 1.0;
        p.c1 = 2.0;
        assert!(p.check_growth(1.0).is_err());
        assert!(p.check_growth(0.4).is_ok());
    }
}
