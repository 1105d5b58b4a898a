//! Matrix-level evaluation of degenerate elliptic operators built from the
//! ordered spectrum of the Hessian: truncated Laplacians 𝒫±ₖ, partial sums of
//! selected eigenvalues, projection traces, Bellman sup-inf combinations, the
//! infinity Laplacian envelopes and the minimal-surface operator.
//!
//! Eigenvalues are always taken in ascending order λ₁ ≤ … ≤ λ_N.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{MatrixError, SymMatrix};

const FRAME_TOL: f64 = 1e-10;
const PROJECTION_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("rank k = {k} outside [1, {n}]")]
    BadRank { k: usize, n: usize },
    #[error("operator `{0}` needs a gradient argument")]
    MissingGradient(&'static str),
    #[error("gradient has length {got}, expected {expected}")]
    GradientDimension { got: usize, expected: usize },
    #[error("frame {index} is not orthonormal (defect {defect:e})")]
    BadFrame { index: usize, defect: f64 },
    #[error("frame {index} has {got} vectors, expected {expected}")]
    FrameRank {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("index list must be strictly increasing within [1, {n}]: {indices:?}")]
    BadIndices { indices: Vec<usize>, n: usize },
    #[error("projection matrix invalid: {0}")]
    BadProjection(String),
    #[error("bellman operator needs nonempty member lists with a common k")]
    BadBellman,
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Which operator `F(q, X)` to evaluate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorSpec {
    LowerPartialSum {
        k: usize,
    },
    UpperPartialSum {
        k: usize,
    },
    /// `Σ λ_{jᵢ}(X)` with 1-based, strictly increasing indices.
    IndexPartialSum {
        indices: Vec<usize>,
    },
    /// `Tr(A X)` for an orthogonal projection `A` of rank k.
    ProjectionTrace {
        projection: SymMatrix,
    },
    /// `sup over outer lists of inf over inner members`.
    BellmanSupinf {
        members: Vec<Vec<OperatorSpec>>,
    },
    InfinityLaplacianLower,
    InfinityLaplacianUpper,
    MinimalSurface,
}

impl OperatorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            OperatorSpec::LowerPartialSum { .. } => "lower_partial_sum",
            OperatorSpec::UpperPartialSum { .. } => "upper_partial_sum",
            OperatorSpec::IndexPartialSum { .. } => "index_partial_sum",
            OperatorSpec::ProjectionTrace { .. } => "projection_trace",
            OperatorSpec::BellmanSupinf { .. } => "bellman_supinf",
            OperatorSpec::InfinityLaplacianLower => "infinity_laplacian_lower",
            OperatorSpec::InfinityLaplacianUpper => "infinity_laplacian_upper",
            OperatorSpec::MinimalSurface => "minimal_surface",
        }
    }

    pub fn needs_gradient(&self) -> bool {
        match self {
            OperatorSpec::InfinityLaplacianLower
            | OperatorSpec::InfinityLaplacianUpper
            | OperatorSpec::MinimalSurface => true,
            OperatorSpec::BellmanSupinf { members } => {
                members.iter().flatten().any(|m| m.needs_gradient())
            }
            _ => false,
        }
    }

    /// The k for which `𝒫⁻ₖ ≤ F ≤ 𝒫⁺ₖ` is asserted. The minimal-surface
    /// operator only has the upper bound `𝒫⁺_{N−1}` on `{λ₁ ≤ 0}`.
    pub fn declared_k(&self, n: usize) -> Option<usize> {
        match self {
            OperatorSpec::LowerPartialSum { k } | OperatorSpec::UpperPartialSum { k } => Some(*k),
            OperatorSpec::IndexPartialSum { indices } => Some(indices.len()),
            OperatorSpec::ProjectionTrace { projection } => {
                Some(projection.trace().round().max(0.0) as usize)
            }
            OperatorSpec::BellmanSupinf { members } => {
                let ks: Vec<Option<usize>> =
                    members.iter().flatten().map(|m| m.declared_k(n)).collect();
                let first = *ks.first()?;
                ks.iter().all(|k| *k == first).then_some(first).flatten()
            }
            OperatorSpec::InfinityLaplacianLower | OperatorSpec::InfinityLaplacianUpper => Some(1),
            OperatorSpec::MinimalSurface => n.checked_sub(1),
        }
    }

    /// Checks the structural invariants in dimension `n`.
    pub fn validate(&self, n: usize) -> Result<(), OperatorError> {
        match self {
            OperatorSpec::LowerPartialSum { k } | OperatorSpec::UpperPartialSum { k } => {
                check_rank(*k, n)
            }
            OperatorSpec::IndexPartialSum { indices } => {
                let ok = !indices.is_empty()
                    && indices.windows(2).all(|w| w[0] < w[1])
                    && indices[0] >= 1
                    && *indices.last().unwrap() <= n;
                if ok {
                    Ok(())
                } else {
                    Err(OperatorError::BadIndices {
                        indices: indices.clone(),
                        n,
                    })
                }
            }
            OperatorSpec::ProjectionTrace { projection } => validate_projection(projection, n),
            OperatorSpec::BellmanSupinf { members } => {
                if members.is_empty() || members.iter().any(|m| m.is_empty()) {
                    return Err(OperatorError::BadBellman);
                }
                for m in members.iter().flatten() {
                    m.validate(n)?;
                }
                self.declared_k(n)
                    .map(|_| ())
                    .ok_or(OperatorError::BadBellman)
            }
            OperatorSpec::InfinityLaplacianLower
            | OperatorSpec::InfinityLaplacianUpper
            | OperatorSpec::MinimalSurface => Ok(()),
        }
    }
}

fn check_rank(k: usize, n: usize) -> Result<(), OperatorError> {
    if k == 0 || k > n {
        Err(OperatorError::BadRank { k, n })
    } else {
        Ok(())
    }
}

fn validate_projection(a: &SymMatrix, n: usize) -> Result<(), OperatorError> {
    if a.dim() != n {
        return Err(OperatorError::BadProjection(format!(
            "dimension {} but problem dimension is {n}",
            a.dim()
        )));
    }
    let a2 = a.as_dmatrix() * a.as_dmatrix();
    let idem = (&a2 - a.as_dmatrix()).amax();
    if idem > PROJECTION_TOL {
        return Err(OperatorError::BadProjection(format!(
            "A² ≠ A (defect {idem:e})"
        )));
    }
    let tr = a.trace();
    let k = tr.round();
    if (tr - k).abs() > PROJECTION_TOL || k < 1.0 {
        return Err(OperatorError::BadProjection(format!(
            "trace {tr} is not a positive integer"
        )));
    }
    Ok(())
}

/// `𝒫⁻ₖ(X) = λ₁ + … + λₖ`.
pub fn partial_sum_lower(x: &SymMatrix, k: usize) -> Result<f64, OperatorError> {
    check_rank(k, x.dim())?;
    Ok(x.eigenvalues()[..k].iter().sum())
}

/// `𝒫⁺ₖ(X) = λ_{N−k+1} + … + λ_N`.
pub fn partial_sum_upper(x: &SymMatrix, k: usize) -> Result<f64, OperatorError> {
    let n = x.dim();
    check_rank(k, n)?;
    Ok(x.eigenvalues()[n - k..].iter().sum())
}

fn check_gradient<'a>(
    q: Option<&'a [f64]>,
    n: usize,
    name: &'static str,
) -> Result<&'a [f64], OperatorError> {
    let q = q.ok_or(OperatorError::MissingGradient(name))?;
    if q.len() != n {
        return Err(OperatorError::GradientDimension {
            got: q.len(),
            expected: n,
        });
    }
    Ok(q)
}

/// Evaluates `F(q, X)`. The gradient is only read by the kinds that need it.
pub fn evaluate(spec: &OperatorSpec, x: &SymMatrix, q: Option<&[f64]>) -> Result<f64, OperatorError> {
    let n = x.dim();
    match spec {
        OperatorSpec::LowerPartialSum { k } => partial_sum_lower(x, *k),
        OperatorSpec::UpperPartialSum { k } => partial_sum_upper(x, *k),
        OperatorSpec::IndexPartialSum { indices } => {
            spec.validate(n)?;
            let ev = x.eigenvalues();
            Ok(indices.iter().map(|&j| ev[j - 1]).sum())
        }
        OperatorSpec::ProjectionTrace { projection } => {
            validate_projection(projection, n)?;
            Ok(projection.trace_product(x))
        }
        OperatorSpec::BellmanSupinf { members } => {
            if members.is_empty() || members.iter().any(|m| m.is_empty()) {
                return Err(OperatorError::BadBellman);
            }
            let mut sup = f64::NEG_INFINITY;
            for inner in members {
                let mut inf = f64::INFINITY;
                for m in inner {
                    inf = inf.min(evaluate(m, x, q)?);
                }
                sup = sup.max(inf);
            }
            Ok(sup)
        }
        OperatorSpec::InfinityLaplacianLower | OperatorSpec::InfinityLaplacianUpper => {
            let q = check_gradient(q, n, spec.name())?;
            let q2: f64 = q.iter().map(|v| v * v).sum();
            if q2 > 0.0 {
                Ok(x.quad_form(q) / q2)
            } else {
                let ev = x.eigenvalues();
                Ok(match spec {
                    OperatorSpec::InfinityLaplacianLower => ev[0],
                    _ => ev[n - 1],
                })
            }
        }
        OperatorSpec::MinimalSurface => {
            let q = check_gradient(q, n, spec.name())?;
            let q2: f64 = q.iter().map(|v| v * v).sum();
            Ok(x.trace() - x.quad_form(q) / (1.0 + q2))
        }
    }
}

/// Direction of optimization in [`frame_relaxation`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameMode {
    Sup,
    Inf,
}

/// An orthonormal k-frame `(v₁, …, vₖ)`.
pub type Frame = Vec<Vec<f64>>;

pub fn frame_defect(frame: &Frame) -> f64 {
    let mut defect = 0.0_f64;
    for (i, a) in frame.iter().enumerate() {
        for (j, b) in frame.iter().enumerate().skip(i) {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            defect = defect.max((dot - target).abs());
        }
    }
    defect
}

/// `sup` (or `inf`) of `Σᵢ X vᵢ·vᵢ` over the given frames. With the full set of
/// orthonormal k-frames this is exactly `𝒫⁺ₖ(X)` (resp. `𝒫⁻ₖ(X)`).
pub fn frame_relaxation(
    x: &SymMatrix,
    k: usize,
    frames: &[Frame],
    mode: FrameMode,
) -> Result<f64, OperatorError> {
    check_rank(k, x.dim())?;
    let mut best = match mode {
        FrameMode::Sup => f64::NEG_INFINITY,
        FrameMode::Inf => f64::INFINITY,
    };
    for (index, frame) in frames.iter().enumerate() {
        if frame.len() != k {
            return Err(OperatorError::FrameRank {
                index,
                got: frame.len(),
                expected: k,
            });
        }
        if frame.iter().any(|v| v.len() != x.dim()) {
            return Err(OperatorError::BadFrame {
                index,
                defect: f64::INFINITY,
            });
        }
        let defect = frame_defect(frame);
        if defect > FRAME_TOL {
            return Err(OperatorError::BadFrame { index, defect });
        }
        let s: f64 = frame.iter().map(|v| x.quad_form(v)).sum();
        best = match mode {
            FrameMode::Sup => best.max(s),
            FrameMode::Inf => best.min(s),
        };
    }
    Ok(best)
}

/// Single-direction frames at the `m` equispaced angles `jπ/m` in the plane.
pub fn frames_2d(m: usize) -> Vec<Frame> {
    (0..m)
        .map(|j| {
            let a = std::f64::consts::PI * j as f64 / m as f64;
            vec![vec![a.cos(), a.sin()]]
        })
        .collect()
}

const PRIMES: [u64; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

fn radical_inverse(base: u64, mut i: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Deterministic orthonormal k-frames in ℝⁿ: Halton points in `[-1,1]^{nk}`
/// orthonormalized by Gram–Schmidt. `seed` offsets the sequence.
pub fn halton_frames(n: usize, k: usize, count: usize, seed: u64) -> Vec<Frame> {
    assert!(k >= 1 && k <= n && n * k <= PRIMES.len());
    let mut out = Vec::with_capacity(count);
    let mut index = seed + 1;
    while out.len() < count {
        let raw: Vec<f64> = (0..n * k)
            .map(|d| 2.0 * radical_inverse(PRIMES[d], index) - 1.0)
            .collect();
        index += 1;
        if let Some(frame) = gram_schmidt(raw.chunks(n).map(|c| c.to_vec()).collect()) {
            out.push(frame);
        }
    }
    out
}

/// Orthonormalizes the vectors in order; `None` if they are (nearly) dependent.
pub fn gram_schmidt(vectors: Vec<Vec<f64>>) -> Option<Frame> {
    let mut basis: Frame = Vec::with_capacity(vectors.len());
    for mut v in vectors {
        for _ in 0..2 {
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            return None;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }
    Some(basis)
}

/// `𝒫⁻ₖ(X) − tol ≤ F(q, X) ≤ 𝒫⁺ₖ(X) + tol` with `tol = 1e-9 (1 + ‖X‖)`.
///
/// For the minimal-surface operator only the upper bound against `𝒫⁺_{N−1}`
/// is checked, and only on matrices with `λ₁(X) ≤ 0`; elsewhere it is vacuous.
pub fn sandwich_check(spec: &OperatorSpec, x: &SymMatrix, q: Option<&[f64]>) -> bool {
    let n = x.dim();
    let tol = 1e-9 * (1.0 + x.norm());
    let Ok(f) = evaluate(spec, x, q) else {
        return false;
    };
    let Some(k) = spec.declared_k(n) else {
        return false;
    };
    if matches!(spec, OperatorSpec::MinimalSurface) {
        if x.eigenvalues()[0] > 0.0 {
            return true;
        }
        return match partial_sum_upper(x, k) {
            Ok(up) => f <= up + tol,
            Err(_) => false,
        };
    }
    match (partial_sum_lower(x, k), partial_sum_upper(x, k)) {
        (Ok(lo), Ok(up)) => lo - tol <= f && f <= up + tol,
        _ => false,
    }
}

/// Spectrum of the Hessian of a radial function `u(|x|)` at radius `r`:
/// `u″` once and `u′/r` with multiplicity `N−1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadialEigen {
    /// Ascending eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// `upper[k−1] = 𝒫⁺ₖ`.
    pub upper: Vec<f64>,
    /// `lower[k−1] = 𝒫⁻ₖ`.
    pub lower: Vec<f64>,
}

pub fn radial_hessian_eigen(upp: f64, upr: f64, n: usize) -> RadialEigen {
    assert!(n >= 2, "radial Hessian needs N >= 2");
    let mut eigenvalues = vec![upr; n - 1];
    eigenvalues.push(upp);
    eigenvalues.sort_by(f64::total_cmp);
    let lower = (1..=n).map(|k| eigenvalues[..k].iter().sum()).collect();
    let upper = (1..=n).map(|k| eigenvalues[n - k..].iter().sum()).collect();
    RadialEigen {
        eigenvalues,
        upper,
        lower,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn rotation(theta: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()])
    }

    #[test]
    fn diagonal_partial_sums() {
        let x = SymMatrix::from_diagonal(&[3.0, 1.0, 2.0]);
        assert_eq!(partial_sum_lower(&x, 2).unwrap(), 3.0);
        assert_eq!(partial_sum_upper(&x, 2).unwrap(), 5.0);
        let z = SymMatrix::zeros(4);
        for k in 1..=4 {
            assert_eq!(partial_sum_lower(&z, k).unwrap(), 0.0);
            assert_eq!(partial_sum_upper(&z, k).unwrap(), 0.0);
        }
    }

    #[test]
    fn bad_rank() {
        let x = SymMatrix::identity(3);
        assert_eq!(
            partial_sum_lower(&x, 0),
            Err(OperatorError::BadRank { k: 0, n: 3 })
        );
        assert!(partial_sum_upper(&x, 4).is_err());
    }

    #[test]
    fn evaluate_examples() {
        let x = SymMatrix::from_diagonal(&[2.0, -1.0]);
        let up = OperatorSpec::UpperPartialSum { k: 1 };
        assert_eq!(evaluate(&up, &x, None).unwrap(), 2.0);
        let zero = [0.0, 0.0];
        let hi = evaluate(&OperatorSpec::InfinityLaplacianUpper, &x, Some(&zero)).unwrap();
        let lo = evaluate(&OperatorSpec::InfinityLaplacianLower, &x, Some(&zero)).unwrap();
        assert_eq!((hi, lo), (2.0, -1.0));
        let ms = evaluate(
            &OperatorSpec::MinimalSurface,
            &SymMatrix::identity(2),
            Some(&[1.0, 0.0]),
        )
        .unwrap();
        assert!((ms - 1.5).abs() < 1e-15);
    }

    #[test]
    fn missing_gradient() {
        let x = SymMatrix::identity(2);
        assert_eq!(
            evaluate(&OperatorSpec::MinimalSurface, &x, None),
            Err(OperatorError::MissingGradient("minimal_surface"))
        );
    }

    #[test]
    fn frame_relaxation_examples() {
        let x = SymMatrix::from_diagonal(&[2.0, -1.0]);
        let frames = frames_2d(4);
        let s = frame_relaxation(&x, 1, &frames, FrameMode::Sup).unwrap();
        assert!((s - 2.0).abs() < 1e-14);

        // rotate the matrix by 22.5°: sup over the same 4 directions misses the top eigenvalue
        let t = std::f64::consts::PI / 8.0;
        let xr = x.conjugate(&rotation(t));
        let s = frame_relaxation(&xr, 1, &frames, FrameMode::Sup).unwrap();
        let expect = 2.0 * t.cos().powi(2) - t.sin().powi(2);
        assert!((s - expect).abs() < 1e-12, "{s} vs {expect}");
        assert!((expect - 1.560660).abs() < 1e-6);
    }

    #[test]
    fn frame_relaxation_rejects_bad_frames() {
        let x = SymMatrix::identity(2);
        let bad = vec![vec![vec![1.0, 1.0]]];
        assert!(matches!(
            frame_relaxation(&x, 1, &bad, FrameMode::Sup),
            Err(OperatorError::BadFrame { index: 0, .. })
        ));
        let wrong_rank = vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]];
        assert!(matches!(
            frame_relaxation(&x, 1, &wrong_rank, FrameMode::Sup),
            Err(OperatorError::FrameRank { .. })
        ));
    }

    #[test]
    fn sandwich_examples() {
        let p = SymMatrix::from_diagonal(&[1.0, 0.0]);
        let proj = OperatorSpec::ProjectionTrace { projection: p };
        let x = SymMatrix::from_diagonal(&[2.0, -1.0]);
        assert_eq!(evaluate(&proj, &x, None).unwrap(), 2.0);
        assert!(sandwich_check(&proj, &x, None));

        let idx = OperatorSpec::IndexPartialSum { indices: vec![2] };
        let y = SymMatrix::from_diagonal(&[1.0, 2.0, 3.0]);
        assert_eq!(evaluate(&idx, &y, None).unwrap(), 2.0);
        assert!(sandwich_check(&idx, &y, None));

        let z = SymMatrix::from_diagonal(&[-2.0, -1.0]);
        let q = [3.0, 0.0];
        let f = evaluate(&OperatorSpec::MinimalSurface, &z, Some(&q)).unwrap();
        assert!((f + 1.2).abs() < 1e-14);
        assert!(sandwich_check(&OperatorSpec::MinimalSurface, &z, Some(&q)));
    }

    #[test]
    fn projection_validation() {
        let bad = SymMatrix::from_diagonal(&[0.5, 0.0]);
        let spec = OperatorSpec::ProjectionTrace { projection: bad };
        assert!(matches!(
            spec.validate(2),
            Err(OperatorError::BadProjection(_))
        ));
    }

    #[test]
    fn index_validation() {
        let spec = OperatorSpec::IndexPartialSum {
            indices: vec![2, 2],
        };
        assert!(spec.validate(3).is_err());
        let spec = OperatorSpec::IndexPartialSum { indices: vec![4] };
        assert!(spec.validate(3).is_err());
    }

    #[test]
    fn radial_eigen_examples() {
        // u = 1 - r²
        let e = radial_hessian_eigen(-2.0, -2.0, 3);
        assert_eq!(e.eigenvalues, vec![-2.0; 3]);
        // hemisphere at r = 0.6: u'' <= u'/r so the top eigenvalue is u'/r
        let r: f64 = 0.6;
        let s = 1.0 - r * r;
        let upp = -s.powf(-1.5);
        let upr = -s.powf(-0.5);
        let e = radial_hessian_eigen(upp, upr, 2);
        assert_eq!(e.upper[0], upr);
        assert_eq!(e.lower[0], upp);
    }

    #[test]
    fn halton_frames_are_orthonormal() {
        for frame in halton_frames(3, 2, 32, 0) {
            assert!(frame_defect(&frame) < 1e-12);
        }
    }

    #[test]
    fn serde_kind_tag() {
        let spec: OperatorSpec = serde_json::from_str(r#"{"kind":"upper_partial_sum","k":1}"#).unwrap();
        assert_eq!(spec, OperatorSpec::UpperPartialSum { k: 1 });
        let spec: OperatorSpec = serde_json::from_str(r#"{"kind":"infinity_laplacian_lower"}"#).unwrap();
        assert_eq!(spec, OperatorSpec::InfinityLaplacianLower);
    }
}
