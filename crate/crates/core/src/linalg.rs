//! Small dense linear-algebra helpers shared by the analysis modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Trace inner product `tr(A^T B)`.
pub fn trace_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Symmetric part `(A + A^T) / 2`.
pub fn sym(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(sym(a)).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

pub fn lambda_max(a: &DMatrix<f64>) -> f64 {
    *sym_eigenvalues(a).last().expect("non-empty matrix")
}

pub fn lambda_min(a: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(a)[0]
}

/// Largest eigenvalue of a symmetric matrix together with a unit eigenvector.
pub fn top_eigenpair(a: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = SymmetricEigen::new(sym(a));
    let (idx, val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))
        .map(|(i, v)| (i, *v))
        .expect("non-empty matrix");
    (val, eig.eigenvectors.column(idx).into_owned())
}

/// Induced 2-norm.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    a.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Eigenvalues of a general real matrix.
pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex64> {
    a.clone().complex_eigenvalues().iter().copied().collect()
}

/// Largest eigenvalue real part.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    eigenvalues(a)
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Hurwitz threshold: real parts must stay below `-1e-10 (1 + ||A||_2)`.
pub fn hurwitz_threshold(a: &DMatrix<f64>) -> f64 {
    -1e-10 * (1.0 + spectral_norm(a))
}

pub fn ensure_hurwitz(a: &DMatrix<f64>) -> Result<()> {
    let abscissa = spectral_abscissa(a);
    if abscissa < hurwitz_threshold(a) {
        Ok(())
    } else {
        Err(Error::NotHurwitz {
            mode: 0,
            max_real: abscissa,
        })
    }
}

/// Eigenvalue projection of a symmetric matrix onto `{X : X >= floor I}`.
pub fn clip_eigenvalues(a: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(sym(a));
    let vals = eig.eigenvalues.map(|v| v.max(floor));
    let v = &eig.eigenvectors;
    let out = v * DMatrix::from_diagonal(&vals) * v.transpose();
    sym(&out)
}

/// Orthonormal basis (as columns) of the numerical column space of `m`:
/// left singular vectors whose singular value exceeds `threshold`.
pub fn range_basis(m: &DMatrix<f64>, threshold: f64) -> DMatrix<f64> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > threshold)
        .map(|(i, _)| i)
        .collect();
    DMatrix::from_fn(m.nrows(), keep.len(), |i, j| u[(i, keep[j])])
}

/// Orthonormal basis of the numerical null space of `m` (right singular
/// vectors with singular value at most `threshold`).
pub fn null_space(m: &DMatrix<f64>, threshold: f64) -> DMatrix<f64> {
    let ncols = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(ncols, ncols);
    }
    // Pad to at least square so the SVD returns a full right basis.
    let padded = if m.nrows() < ncols {
        let mut p = DMatrix::zeros(ncols, ncols);
        p.view_mut((0, 0), (m.nrows(), ncols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= threshold)
        .map(|(i, _)| i)
        .collect();
    DMatrix::from_fn(ncols, keep.len(), |i, j| v_t[(keep[j], i)])
}

/// Orthonormal complement of the column space of an orthonormal `basis`
/// inside the column space of another orthonormal `ambient`.
pub fn complement_in(ambient: &DMatrix<f64>, basis: &DMatrix<f64>, threshold: f64) -> DMatrix<f64> {
    if basis.ncols() == 0 {
        return ambient.clone();
    }
    // Coordinates of the sub-basis inside the ambient basis; complement there.
    let coords = ambient.transpose() * basis;
    let null = null_space(&coords.transpose(), threshold);
    ambient * null
}

pub fn complex_matrix(a: &DMatrix<f64>) -> DMatrix<Complex64> {
    a.map(|v| Complex64::new(v, 0.0))
}
