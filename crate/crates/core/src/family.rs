use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default relative tolerance for rank and zero decisions.
pub const DEFAULT_TOL: f64 = 1e-9;

/// The finite set of mode matrices `A_1..A_m` of a switched linear system.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFamily {
    n: usize,
    modes: Vec<DMatrix<f64>>,
    tol: f64,
}

impl MatrixFamily {
    pub fn new(modes: Vec<DMatrix<f64>>) -> Result<Self> {
        Self::with_tol(modes, DEFAULT_TOL)
    }

    pub fn with_tol(modes: Vec<DMatrix<f64>>, tol: f64) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidFamily("at least one mode is required".into()));
        }
        if !(tol.is_finite() && tol >= 0.0) {
            return Err(Error::InvalidFamily(format!("tolerance {tol} must be finite and >= 0")));
        }
        let n = modes[0].nrows();
        if n == 0 {
            return Err(Error::InvalidFamily("state dimension must be positive".into()));
        }
        for a in &modes {
            if a.nrows() != n || a.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    rows: a.nrows(),
                    cols: a.ncols(),
                });
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidFamily("matrix entries must be finite".into()));
            }
        }
        Ok(Self { n, modes, tol })
    }

    /// Builds a family from row-major nested vectors.
    pub fn from_rows(rows: &[Vec<Vec<f64>>]) -> Result<Self> {
        let modes = rows
            .iter()
            .map(|m| matrix_from_rows(m))
            .collect::<Result<Vec<_>>>()?;
        Self::new(modes)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[DMatrix<f64>] {
        &self.modes
    }

    pub fn mode(&self, p: usize) -> &DMatrix<f64> {
        &self.modes[p]
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Largest Frobenius norm among the modes.
    pub fn max_norm(&self) -> f64 {
        self.modes.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    /// Same family with the modes reordered by `order`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.len() {
            return Err(Error::InvalidArgument("permutation length mismatch".into()));
        }
        let modes = order.iter().map(|&i| self.modes[i].clone()).collect();
        Self::with_tol(modes, self.tol)
    }

    /// Same family conjugated by `s`: every mode becomes `S A S^-1`.
    pub fn conjugated(&self, s: &DMatrix<f64>) -> Result<Self> {
        let s_inv = s
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::NumericalFailure("similarity transform is singular".into()))?;
        let modes = self.modes.iter().map(|a| s * a * &s_inv).collect();
        Self::with_tol(modes, self.tol)
    }

    /// Checks each mode for the Hurwitz property, failing on the first violator.
    pub fn ensure_hurwitz(&self) -> Result<()> {
        for (p, a) in self.modes.iter().enumerate() {
            crate::linalg::ensure_hurwitz(a).map_err(|e| match e {
                Error::NotHurwitz { max_real, .. } => Error::NotHurwitz { mode: p, max_real },
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn to_rows(&self) -> Vec<Vec<Vec<f64>>> {
        self.modes.iter().map(matrix_to_rows).collect()
    }
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != nc) {
        return Err(Error::Parse("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}
