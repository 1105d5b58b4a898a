//! Domains `Ω = ∩_{y∈Y} B_R(y)` for a finite center set `Y`.
//!
//! The boundary distance is exact: `δ(x) = min_y (R − |x − y|)`. The regularized
//! distance `d` is a p-norm soft-min of smoothed per-ball distances
//! `d_y = R − φ(|x − y|)`, where `φ(r) = r` away from the center and is a
//! quartic C² cap on `r < r₀`. Each `d_y` is concave and `≤ R − |x − y|`, and
//! the soft-min `(Σ d_y^{−p})^{−1/p}` is concave, nondecreasing in each
//! argument and lies in `[n^{−1/p} min d_y, min d_y]`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::SymMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("domain needs at least one center")]
    NoCenters,
    #[error("radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("dimension must be at least 2, got {0}")]
    BadDimension(usize),
    #[error("center {index} has dimension {got}, expected {expected}")]
    CenterDimension {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("centers {i} and {j} are {dist} apart, need < 2R = {two_r}")]
    CentersTooFar {
        i: usize,
        j: usize,
        dist: f64,
        two_r: f64,
    },
    #[error("intersection of balls has empty interior")]
    EmptyInterior,
    #[error("query point has δ = {0} ≤ 0")]
    QueryOutsideDomain(f64),
    #[error("smoothing must be positive, got {0}")]
    BadSmoothing(f64),
}

/// `Ω = ∩ B_R(y)` over a finite, nonempty center list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDomain", into = "RawDomain")]
pub struct BallDomain {
    centers: Vec<Vec<f64>>,
    radius: f64,
    dimension: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RawDomain {
    centers: Vec<Vec<f64>>,
    radius: f64,
    dimension: usize,
}

impl TryFrom<RawDomain> for BallDomain {
    type Error = GeometryError;
    fn try_from(r: RawDomain) -> Result<Self, Self::Error> {
        BallDomain::new(r.centers, r.radius, r.dimension)
    }
}

impl From<BallDomain> for RawDomain {
    fn from(d: BallDomain) -> Self {
        RawDomain {
            centers: d.centers,
            radius: d.radius,
            dimension: d.dimension,
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

impl BallDomain {
    pub fn new(centers: Vec<Vec<f64>>, radius: f64, dimension: usize) -> Result<Self, GeometryError> {
        if centers.is_empty() {
            return Err(GeometryError::NoCenters);
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(GeometryError::BadRadius(radius));
        }
        if dimension < 2 {
            return Err(GeometryError::BadDimension(dimension));
        }
        for (index, c) in centers.iter().enumerate() {
            if c.len() != dimension {
                return Err(GeometryError::CenterDimension {
                    index,
                    got: c.len(),
                    expected: dimension,
                });
            }
        }
        for i in 0..centers.len() {
            for j in i + 1..centers.len() {
                let d = dist(&centers[i], &centers[j]);
                if d >= 2.0 * radius {
                    return Err(GeometryError::CentersTooFar {
                        i,
                        j,
                        dist: d,
                        two_r: 2.0 * radius,
                    });
                }
            }
        }
        let domain = Self {
            centers,
            radius,
            dimension,
        };
        // pairwise overlap does not imply a common interior point for |Y| > 2
        if domain.centers.len() > 2 && domain.interior_probe().is_none() {
            return Err(GeometryError::EmptyInterior);
        }
        Ok(domain)
    }

    /// The unit ball (or ball of radius `radius`) centered at the origin.
    pub fn ball(radius: f64, dimension: usize) -> Result<Self, GeometryError> {
        Self::new(vec![vec![0.0; dimension]], radius, dimension)
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Axis-aligned box containing Ω.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.dimension;
        let mut lo = vec![f64::NEG_INFINITY; n];
        let mut hi = vec![f64::INFINITY; n];
        for c in &self.centers {
            for i in 0..n {
                lo[i] = lo[i].max(c[i] - self.radius);
                hi[i] = hi[i].min(c[i] + self.radius);
            }
        }
        (lo, hi)
    }

    /// A point with δ > 0, found by maximizing δ with a subgradient ascent
    /// started at the centroid of the centers.
    pub fn interior_probe(&self) -> Option<Vec<f64>> {
        let n = self.dimension;
        let m = self.centers.len() as f64;
        let mut x: Vec<f64> = (0..n)
            .map(|i| self.centers.iter().map(|c| c[i]).sum::<f64>() / m)
            .collect();
        let mut best = x.clone();
        let mut best_d = delta(self, &x);
        for it in 0..2000 {
            if best_d > 0.0 {
                return Some(best);
            }
            // move away from the farthest center
            let (far, r) = self
                .centers
                .iter()
                .map(|c| (c, dist(&x, c)))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            if r == 0.0 {
                break;
            }
            let step = self.radius / (10.0 + it as f64);
            for i in 0..n {
                x[i] -= step * (x[i] - far[i]) / r;
            }
            let d = delta(self, &x);
            if d > best_d {
                best_d = d;
                best = x.clone();
            }
        }
        (best_d > 0.0).then_some(best)
    }

    /// Largest δ over Ω, approximated on the sample set plus the probe point.
    pub fn max_delta_estimate(&self, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = self
            .interior_probe()
            .map(|x| delta(self, &x))
            .unwrap_or(0.0);
        for x in sample_interior(self, samples, &mut rng) {
            m = m.max(delta(self, &x));
        }
        m
    }
}

/// `min_y (R − |x − y|)`: positive inside, zero on ∂Ω, negative outside.
pub fn delta(domain: &BallDomain, x: &[f64]) -> f64 {
    domain
        .centers
        .iter()
        .map(|c| domain.radius - dist(x, c))
        .fold(f64::INFINITY, f64::min)
}

/// Index of a center attaining the minimum in `delta`.
pub fn nearest_boundary_ball(domain: &BallDomain, x: &[f64]) -> usize {
    domain
        .centers
        .iter()
        .enumerate()
        .map(|(i, c)| (i, domain.radius - dist(x, c)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .unwrap()
}

/// Value, gradient and Hessian of the regularized distance at one point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistanceBundle {
    pub delta: f64,
    pub d: f64,
    pub grad_d: Vec<f64>,
    pub hess_d: SymMatrix,
    pub smoothing: f64,
}

/// Default smoothing length `10⁻³·R`.
pub fn default_smoothing(domain: &BallDomain) -> f64 {
    1e-3 * domain.radius
}

struct BallTerm {
    value: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
}

fn ball_term(x: &[f64], y: &[f64], radius: f64, r0: f64) -> BallTerm {
    let n = x.len();
    let z: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut hess = vec![0.0; n * n];
    if r >= r0 {
        let grad: Vec<f64> = z.iter().map(|v| -v / r).collect();
        for i in 0..n {
            for j in 0..n {
                let id = if i == j { 1.0 } else { 0.0 };
                hess[i * n + j] = -(id - z[i] * z[j] / (r * r)) / r;
            }
        }
        BallTerm {
            value: radius - r,
            grad,
            hess,
        }
    } else {
        let s = r / r0;
        let phi = r0 * (3.0 / 8.0 + 0.75 * s * s - s.powi(4) / 8.0);
        let phi_over_r = 1.5 / r0 - r * r / (2.0 * r0.powi(3));
        let grad: Vec<f64> = z.iter().map(|v| -phi_over_r * v).collect();
        let inv_r03 = 1.0 / r0.powi(3);
        for i in 0..n {
            for j in 0..n {
                let id = if i == j { 1.0 } else { 0.0 };
                hess[i * n + j] = -(phi_over_r * id - z[i] * z[j] * inv_r03);
            }
        }
        BallTerm {
            value: radius - phi,
            grad,
            hess,
        }
    }
}

/// The soft-min exponent used for a given smoothing length.
pub fn softmin_exponent(domain: &BallDomain, smoothing: f64) -> f64 {
    domain.radius / smoothing
}

/// Regularized distance `d` with its gradient and Hessian.
///
/// `smoothing` is a length: it is the radius of the C² cap around each center
/// and sets the soft-min exponent `p = R / smoothing`.
pub fn regularized_distance(
    domain: &BallDomain,
    x: &[f64],
    smoothing: f64,
) -> Result<DistanceBundle, GeometryError> {
    if !(smoothing > 0.0 && smoothing.is_finite()) {
        return Err(GeometryError::BadSmoothing(smoothing));
    }
    let dlt = delta(domain, x);
    if dlt <= 0.0 {
        return Err(GeometryError::QueryOutsideDomain(dlt));
    }
    let n = domain.dimension;
    let r0 = smoothing.min(0.5 * domain.radius);
    let p = softmin_exponent(domain, smoothing);
    let terms: Vec<BallTerm> = domain
        .centers
        .iter()
        .map(|y| ball_term(x, y, domain.radius, r0))
        .collect();
    let m = terms
        .iter()
        .map(|t| t.value)
        .fold(f64::INFINITY, f64::min);
    let sum: f64 = terms.iter().map(|t| (m / t.value).powf(p)).sum();
    let d = m * sum.powf(-1.0 / p);

    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n * n];
    for t in &terms {
        let lam = (d / t.value).powf(p + 1.0);
        if lam == 0.0 {
            continue;
        }
        for i in 0..n {
            grad[i] += lam * t.grad[i];
        }
        for i in 0..n * n {
            hess[i] += lam * t.hess[i];
        }
        for i in 0..n {
            for j in 0..n {
                hess[i * n + j] -= (p + 1.0) * lam * t.grad[i] * t.grad[j] / t.value;
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            hess[i * n + j] += (p + 1.0) * grad[i] * grad[j] / d;
        }
    }
    // Cancellation leaves round-off asymmetry; average it out.
    let h = nalgebra::DMatrix::from_row_slice(n, n, &hess);
    let hess_d = SymMatrix::new((&h + h.transpose()) * 0.5).expect("symmetrized Hessian");
    Ok(DistanceBundle {
        delta: dlt,
        d,
        grad_d: grad,
        hess_d,
        smoothing,
    })
}

/// Fraction `θ ∈ (0, 1]` of the step `h·v` that stays in Ω̄.
///
/// Per ball, the exit time is the positive root of `|x + t v − y|² = R²`;
/// θ is the smallest exit time over the balls divided by `h`, capped at 1.
pub fn boundary_ray_fraction(domain: &BallDomain, x: &[f64], v: &[f64], h: f64) -> f64 {
    let a: f64 = v.iter().map(|c| c * c).sum();
    let mut t_min = f64::INFINITY;
    for y in &domain.centers {
        let z: Vec<f64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
        let b: f64 = z.iter().zip(v).map(|(p, q)| p * q).sum();
        let c: f64 = z.iter().map(|p| p * p).sum::<f64>() - domain.radius * domain.radius;
        let disc = (b * b - a * c).max(0.0).sqrt();
        let t = if b > 0.0 {
            -c / (b + disc)
        } else {
            (disc - b) / a
        };
        t_min = t_min.min(t);
    }
    (t_min / h).min(1.0)
}

/// `n` points drawn uniformly from Ω by rejection from the bounding box.
pub fn sample_interior<R: Rng + ?Sized>(domain: &BallDomain, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let (lo, hi) = domain.bounding_box();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x: Vec<f64> = lo
            .iter()
            .zip(&hi)
            .map(|(a, b)| rng.gen_range(*a..*b))
            .collect();
        if delta(domain, &x) > 0.0 {
            out.push(x);
        }
    }
    out
}

/// Measured constants of the regularized distance over a sample of Ω.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceConstants {
    /// `min d/δ`.
    pub c1: f64,
    /// `max d/δ`.
    pub c2: f64,
    /// `max |∇d|`.
    pub b1: f64,
    /// `max δ‖D²d‖`.
    pub b2: f64,
    pub samples: usize,
}

/// Sample-based estimate of `C₁, C₂, B₁, B₂`. The centers that lie in Ω are
/// always included, since the cap curvature peaks there.
pub fn estimate_constants(
    domain: &BallDomain,
    smoothing: f64,
    samples: usize,
    seed: u64,
) -> Result<DistanceConstants, GeometryError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = sample_interior(domain, samples, &mut rng);
    points.extend(
        domain
            .centers
            .iter()
            .filter(|c| delta(domain, c) > 0.0)
            .cloned(),
    );
    if let Some(p) = domain.interior_probe() {
        points.push(p);
    }
    let mut k = DistanceConstants {
        c1: f64::INFINITY,
        c2: 0.0,
        b1: 0.0,
        b2: 0.0,
        samples: points.len(),
    };
    for x in &points {
        let b = regularized_distance(domain, x, smoothing)?;
        let ratio = b.d / b.delta;
        k.c1 = k.c1.min(ratio);
        k.c2 = k.c2.max(ratio);
        k.b1 = k
            .b1
            .max(b.grad_d.iter().map(|g| g * g).sum::<f64>().sqrt());
        k.b2 = k.b2.max(b.delta * b.hess_d.norm());
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_ball() -> BallDomain {
        BallDomain::new(vec![vec![-0.5, 0.0], vec![0.5, 0.0]], 1.0, 2).unwrap()
    }

    #[test]
    fn delta_examples() {
        let disk = BallDomain::ball(1.0, 2).unwrap();
        assert!((delta(&disk, &[0.3, 0.0]) - 0.7).abs() < 1e-15);
        let lens = two_ball();
        assert!((delta(&lens, &[0.0, 0.0]) - 0.5).abs() < 1e-15);
        let expect = 1.0 - 0.41f64.sqrt();
        assert!((delta(&lens, &[0.0, 0.4]) - expect).abs() < 1e-15);
        assert!((expect - 0.359688).abs() < 1e-6);
    }

    #[test]
    fn validation() {
        assert_eq!(BallDomain::new(vec![], 1.0, 2), Err(GeometryError::NoCenters));
        assert!(matches!(
            BallDomain::new(vec![vec![-1.0, 0.0], vec![1.0, 0.0]], 1.0, 2),
            Err(GeometryError::CentersTooFar { .. })
        ));
        assert!(BallDomain::new(vec![vec![0.0, 0.0]], -1.0, 2).is_err());
        assert!(BallDomain::new(vec![vec![0.0]], 1.0, 1).is_err());
        // three pairwise-overlapping balls with no common point
        let r = 1.0;
        let s = 1.9;
        let tri = vec![
            vec![0.0, 0.0],
            vec![s, 0.0],
            vec![s / 2.0, s * 3f64.sqrt() / 2.0],
        ];
        assert_eq!(BallDomain::new(tri, r, 2), Err(GeometryError::EmptyInterior));
    }

    #[test]
    fn serde_roundtrip_validates() {
        let d = two_ball();
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(serde_json::from_str::<BallDomain>(&s).unwrap(), d);
        let bad = r#"{"centers":[],"radius":1.0,"dimension":2}"#;
        assert!(serde_json::from_str::<BallDomain>(bad).is_err());
    }

    #[test]
    fn regularized_single_ball() {
        let disk = BallDomain::ball(1.0, 2).unwrap();
        let b = regularized_distance(&disk, &[0.3, 0.0], 1e-3).unwrap();
        assert!(b.d >= 0.6993 && b.d <= 0.7007);
        assert!((b.grad_d[0] + 1.0).abs() < 1e-6 && b.grad_d[1].abs() < 1e-6);
    }

    #[test]
    fn regularized_two_ball_center() {
        let b = regularized_distance(&two_ball(), &[0.0, 0.0], 1e-3).unwrap();
        assert!(b.d <= 0.5 && b.d >= 0.5 * 0.99);
    }

    #[test]
    fn regularized_outside_errors() {
        assert!(matches!(
            regularized_distance(&two_ball(), &[2.0, 0.0], 1e-3),
            Err(GeometryError::QueryOutsideDomain(_))
        ));
    }

    #[test]
    fn cap_is_c2_at_its_edge() {
        let disk = BallDomain::ball(1.0, 2).unwrap();
        let s = 1e-2;
        let inside = regularized_distance(&disk, &[s * (1.0 - 1e-9), 0.0], s).unwrap();
        let outside = regularized_distance(&disk, &[s * (1.0 + 1e-9), 0.0], s).unwrap();
        assert!((inside.d - outside.d).abs() < 1e-9);
        assert!((inside.grad_d[0] - outside.grad_d[0]).abs() < 1e-6);
        assert!((inside.hess_d.get(0, 0) - outside.hess_d.get(0, 0)).abs() < 1e-4);
        assert!((inside.hess_d.get(1, 1) - outside.hess_d.get(1, 1)).abs() < 1e-4);
    }

    #[test]
    fn ray_fraction_examples() {
        let disk = BallDomain::ball(1.0, 2).unwrap();
        let t = boundary_ray_fraction(&disk, &[0.95, 0.0], &[1.0, 0.0], 0.1);
        assert!((t - 0.5).abs() < 1e-12);
        assert_eq!(boundary_ray_fraction(&disk, &[0.95, 0.0], &[-1.0, 0.0], 0.1), 1.0);
        let t = boundary_ray_fraction(&two_ball(), &[0.45, 0.0], &[1.0, 0.0], 0.1);
        assert!((t - 0.5).abs() < 1e-12);
        assert_eq!(boundary_ray_fraction(&disk, &[0.75, 0.0], &[1.0, 0.0], 0.25), 1.0);
    }

    #[test]
    fn constants_two_ball() {
        let k = estimate_constants(&two_ball(), 1e-3, 500, 7).unwrap();
        assert!(k.c1 >= 0.9 && k.c2 <= 1.0 + 1e-12);
        assert!(k.b1 <= 1.0 + 1e-12);
    }
}
