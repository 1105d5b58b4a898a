#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trunclap::operators::OperatorSpec;
use trunclap::SymMatrix;

pub const DIMS: [usize; 3] = [2, 3, 5];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Symmetric matrix with entries uniform in `[-s, s]`.
pub fn random_sym<R: Rng>(n: usize, s: f64, rng: &mut R) -> SymMatrix {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-s..s));
    SymMatrix::new((&a + a.transpose()) * 0.5).unwrap()
}

/// `BᵀB`, positive semidefinite, with a random rank.
pub fn random_psd<R: Rng>(n: usize, rng: &mut R) -> SymMatrix {
    let rank = rng.gen_range(1..=n);
    let b = DMatrix::from_fn(rank, n, |_, _| rng.gen_range(-1.0..1.0));
    SymMatrix::new(b.transpose() * &b).unwrap()
}

pub fn random_orthogonal<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    a.qr().q()
}

pub fn random_vec<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()
}

/// Orthogonal projection onto a random k-dimensional subspace.
pub fn random_projection<R: Rng>(n: usize, k: usize, rng: &mut R) -> SymMatrix {
    let q = random_orthogonal(n, rng);
    let v = q.columns(0, k).into_owned();
    SymMatrix::new(&v * v.transpose()).unwrap()
}

/// One instance of every operator kind in dimension `n`.
pub fn all_kinds<R: Rng>(n: usize, rng: &mut R) -> Vec<OperatorSpec> {
    let k = rng.gen_range(1..n);
    let mut indices: Vec<usize> = (1..=n).collect();
    while indices.len() > k {
        let i = rng.gen_range(0..indices.len());
        indices.remove(i);
    }
    vec![
        OperatorSpec::LowerPartialSum { k },
        OperatorSpec::UpperPartialSum { k },
        OperatorSpec::IndexPartialSum { indices: indices.clone() },
        OperatorSpec::ProjectionTrace {
            projection: random_projection(n, k, rng),
        },
        OperatorSpec::BellmanSupinf {
            members: vec![
                vec![
                    OperatorSpec::UpperPartialSum { k },
                    OperatorSpec::IndexPartialSum { indices },
                ],
                vec![
                    OperatorSpec::LowerPartialSum { k },
                    OperatorSpec::ProjectionTrace {
                        projection: random_projection(n, k, rng),
                    },
                ],
            ],
        },
        OperatorSpec::InfinityLaplacianLower,
        OperatorSpec::InfinityLaplacianUpper,
        OperatorSpec::MinimalSurface,
    ]
}

pub fn tol(x: &SymMatrix) -> f64 {
    1e-9 * (1.0 + x.norm())
}
