//! Dense symmetric matrices and their ordered spectra.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative asymmetry tolerated at construction.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix asymmetry {0:e} exceeds tolerance")]
    Asymmetric(f64),
    #[error("row {row} has length {got}, expected {expected}")]
    RaggedRow { row: usize, got: usize, expected: usize },
}

/// A real symmetric N×N matrix. Symmetry is checked once at construction and
/// the stored entries are exactly symmetric afterwards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self, MatrixError> {
        if m.nrows() != m.ncols() {
            return Err(MatrixError::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let scale = m.amax().max(f64::MIN_POSITIVE);
        let asym = (&m - m.transpose()).amax() / scale;
        if asym > SYMMETRY_TOL {
            return Err(MatrixError::Asymmetric(asym));
        }
        Ok(Self((&m + m.transpose()) * 0.5))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MatrixError> {
        let n = rows.len();
        for (row, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(MatrixError::RaggedRow {
                    row,
                    got: r.len(),
                    expected: n,
                });
            }
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self(DMatrix::from_fn(n, n, |i, j| if i == j { d[i] } else { 0.0 }))
    }

    /// `v ⊗ v`.
    pub fn outer(v: &[f64]) -> Self {
        let n = v.len();
        Self(DMatrix::from_fn(n, n, |i, j| v[i] * v[j]))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.0.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Eigenpairs with eigenvalues ascending; eigenvectors are unit columns.
    pub fn eigen(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let se = SymmetricEigen::new(self.0.clone());
        let mut idx: Vec<usize> = (0..self.dim()).collect();
        idx.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
        let vals = idx.iter().map(|&i| se.eigenvalues[i]).collect();
        let vecs = idx
            .iter()
            .map(|&i| se.eigenvectors.column(i).iter().copied().collect())
            .collect();
        (vals, vecs)
    }

    /// `X v · v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += self.0[(i, j)] * v[j];
            }
            acc += v[i] * row;
        }
        acc
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Spectral norm.
    pub fn norm(&self) -> f64 {
        self.eigenvalues()
            .iter()
            .fold(0.0_f64, |m, &l| m.max(l.abs()))
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> f64 {
        self.0.norm()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(&self.0 * s)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(&self.0 - &other.0)
    }

    /// `Qᵀ X Q` for a square `Q`.
    pub fn conjugate(&self, q: &DMatrix<f64>) -> Self {
        let m = q.transpose() * &self.0 * q;
        Self((&m + m.transpose()) * 0.5)
    }

    /// `A X` trace without forming the product.
    pub fn trace_product(&self, other: &Self) -> f64 {
        self.0.component_mul(&other.0).sum()
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = MatrixError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        Self::from_rows(&rows)
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        let n = m.dim();
        (0..n).map(|i| (0..n).map(|j| m.0[(i, j)]).collect()).collect()
    }
}
