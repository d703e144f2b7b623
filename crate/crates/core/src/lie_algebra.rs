//! Matrix Lie algebras generated by a family of modes: bracket closure,
//! lower central and derived series, Killing form and radical.
//!
//! Subspaces of the algebra are handled in coordinates with respect to an
//! orthonormal basis (trace inner product), so Euclidean orthogonality in
//! coordinates is orthogonality of the underlying matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::MatrixFamily;
use crate::linalg::{complement_in, null_space, range_basis, trace_inner};

/// Matrix commutator `AB - BA`.
pub fn bracket(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if b.shape() != a.shape() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            rows: b.nrows(),
            cols: b.ncols(),
        });
    }
    Ok(a * b - b * a)
}

fn bracket_unchecked(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * b - b * a
}

/// Orthonormal basis of a generated matrix Lie algebra with its structure
/// constants.
#[derive(Debug, Clone)]
pub struct LieAlgebraBasis {
    n: usize,
    tol: f64,
    basis: Vec<DMatrix<f64>>,
    /// Number of basis elements contributed at each bracket depth.
    layers: Vec<usize>,
    /// `structure[i * d + j]` holds the coordinates of `[b_i, b_j]`.
    structure: Vec<DVector<f64>>,
}

impl LieAlgebraBasis {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn basis(&self) -> &[DMatrix<f64>] {
        &self.basis
    }

    pub fn layers(&self) -> &[usize] {
        &self.layers
    }

    pub fn structure_constant(&self, i: usize, j: usize) -> &DVector<f64> {
        &self.structure[i * self.dim() + j]
    }

    /// Coordinates of a matrix projected onto the basis.
    pub fn coordinates(&self, m: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.basis.iter().map(|b| trace_inner(b, m)))
    }

    /// Matrix with the given coordinates.
    pub fn element(&self, coords: &DVector<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.n);
        for (b, c) in self.basis.iter().zip(coords.iter()) {
            out += b * *c;
        }
        out
    }

    /// Largest residual left after reprojecting every pairwise bracket.
    pub fn closure_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for bi in &self.basis {
            for bj in &self.basis {
                let br = bracket_unchecked(bi, bj);
                let res = &br - self.element(&self.coordinates(&br));
                worst = worst.max(res.norm());
            }
        }
        worst
    }

    /// Bracket of coordinate vectors.
    pub fn bracket_coords(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let d = self.dim();
        let mut out = DVector::zeros(d);
        for i in 0..d {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..d {
                if y[j] == 0.0 {
                    continue;
                }
                out.axpy(x[i] * y[j], self.structure_constant(i, j), 1.0);
            }
        }
        out
    }

    /// Orthonormal coordinate basis of `[U, W]` for coordinate subspaces
    /// given as orthonormal columns.
    pub fn bracket_subspace(&self, u: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
        let d = self.dim();
        let mut cols = Vec::with_capacity(u.ncols() * w.ncols());
        for a in u.column_iter() {
            for b in w.column_iter() {
                cols.push(self.bracket_coords(&a.into_owned(), &b.into_owned()));
            }
        }
        if cols.is_empty() {
            return DMatrix::zeros(d, 0);
        }
        let m = DMatrix::from_columns(&cols);
        let max_norm = cols.iter().map(|c| c.norm()).fold(0.0, f64::max);
        range_basis(&m, self.tol * (1.0 + max_norm))
    }

    /// Adjoint representation of basis element `i` as a `d x d` matrix.
    pub fn ad(&self, i: usize) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |r, j| self.structure_constant(i, j)[r])
    }

    /// Killing form `K(b_i, b_j) = tr(ad_i ad_j)`.
    pub fn killing_form(&self) -> DMatrix<f64> {
        let d = self.dim();
        let ads: Vec<DMatrix<f64>> = (0..d).map(|i| self.ad(i)).collect();
        let mut k = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let v = trace_inner(&ads[i].transpose(), &ads[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }

    fn full(&self) -> DMatrix<f64> {
        DMatrix::identity(self.dim(), self.dim())
    }
}

/// Accepts `candidate` (and returns its normalized residual) iff it is
/// numerically independent of the current orthonormal `basis`.
fn orthogonalize(basis: &[DMatrix<f64>], candidate: &DMatrix<f64>, tol: f64) -> Option<DMatrix<f64>> {
    let cand_norm = candidate.norm();
    let mut r = candidate.clone();
    // Two passes of classical Gram–Schmidt.
    for _ in 0..2 {
        for b in basis {
            let c = trace_inner(b, &r);
            r -= b * c;
        }
    }
    let res = r.norm();
    if res > tol * (1.0 + cand_norm) {
        Some(r / res)
    } else {
        None
    }
}

/// Generates the smallest bracket-closed subspace containing all modes.
///
/// Breadth-first over bracket depth: layer `k + 1` holds the new directions
/// among `[A_p, X]` for normalized generators `A_p` and `X` in layer `k`.
pub fn generate_algebra(family: &MatrixFamily) -> LieAlgebraBasis {
    let n = family.n();
    let tol = family.tol();
    let max_dim = n * n;

    let generators: Vec<DMatrix<f64>> = family
        .modes()
        .iter()
        .filter(|a| a.norm() > 0.0)
        .map(|a| a / a.norm())
        .collect();

    let mut basis: Vec<DMatrix<f64>> = Vec::new();
    let mut layers = Vec::new();
    let mut frontier = Vec::new();
    for g in &generators {
        if let Some(v) = orthogonalize(&basis, g, tol) {
            basis.push(v.clone());
            frontier.push(v);
        }
    }
    if !frontier.is_empty() {
        layers.push(frontier.len());
    }

    while !frontier.is_empty() && basis.len() < max_dim {
        let mut next = Vec::new();
        'outer: for g in &generators {
            for x in &frontier {
                let cand = bracket_unchecked(g, x);
                if let Some(v) = orthogonalize(&basis, &cand, tol) {
                    basis.push(v.clone());
                    next.push(v);
                    if basis.len() == max_dim {
                        break 'outer;
                    }
                }
            }
        }
        if !next.is_empty() {
            layers.push(next.len());
        }
        frontier = next;
    }

    let d = basis.len();
    let mut structure = vec![DVector::zeros(d); d * d];
    for i in 0..d {
        for j in (i + 1)..d {
            let br = bracket_unchecked(&basis[i], &basis[j]);
            let c = DVector::from_iterator(d, basis.iter().map(|b| trace_inner(b, &br)));
            structure[j * d + i] = -&c;
            structure[i * d + j] = c;
        }
    }

    LieAlgebraBasis {
        n,
        tol,
        basis,
        layers,
        structure,
    }
}

/// True iff every pairwise bracket is negligible relative to the squared
/// largest mode norm.
pub fn is_commuting(family: &MatrixFamily) -> bool {
    let scale = family.max_norm().powi(2);
    let modes = family.modes();
    for i in 0..modes.len() {
        for j in (i + 1)..modes.len() {
            if bracket_unchecked(&modes[i], &modes[j]).norm() > family.tol() * scale {
                return false;
            }
        }
    }
    true
}

/// Dimensions of the lower central series `g^1 = g, g^{k+1} = [g, g^k]`,
/// stopping at zero or when it stabilizes.
pub fn lower_central_series(basis: &LieAlgebraBasis) -> Vec<usize> {
    let full = basis.full();
    let mut dims = vec![basis.dim()];
    let mut current = full.clone();
    loop {
        let next = basis.bracket_subspace(&full, &current);
        dims.push(next.ncols());
        if next.ncols() == 0 || next.ncols() == current.ncols() {
            return dims;
        }
        current = next;
    }
}

/// Dimensions of the derived series `g^(k+1) = [g^(k), g^(k)]`.
pub fn derived_series(basis: &LieAlgebraBasis) -> Vec<usize> {
    let mut dims = vec![basis.dim()];
    let mut current = basis.full();
    loop {
        let next = basis.bracket_subspace(&current, &current);
        dims.push(next.ncols());
        if next.ncols() == 0 || next.ncols() == current.ncols() {
            return dims;
        }
        current = next;
    }
}

/// Smallest `k` with `g^{k+1} = 0`, or `None` when the lower central series
/// stabilizes at a nonzero subspace.
pub fn nilpotency_order(basis: &LieAlgebraBasis) -> Option<usize> {
    if basis.dim() == 0 {
        return Some(1);
    }
    let dims = lower_central_series(basis);
    if *dims.last().unwrap() == 0 {
        Some(dims.len() - 1)
    } else {
        None
    }
}

pub fn is_solvable(basis: &LieAlgebraBasis) -> bool {
    basis.dim() == 0 || *derived_series(basis).last().unwrap() == 0
}

/// Verdict record for the commutation-relation hierarchy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgebraClassification {
    pub dim: usize,
    pub commuting: bool,
    pub nilpotency_order: Option<usize>,
    pub solvable: bool,
    pub solvable_plus_compact: bool,
    #[serde(with = "crate::serde_rows::vec")]
    pub radical_basis: Vec<DMatrix<f64>>,
    pub killing_spectrum: Vec<f64>,
}

impl AlgebraClassification {
    /// commuting ⇒ nilpotent ⇒ solvable ⇒ solvable-plus-compact.
    pub fn is_monotone(&self) -> bool {
        (!self.commuting || self.nilpotency_order.is_some())
            && (self.nilpotency_order.is_none() || self.solvable)
            && (!self.solvable || self.solvable_plus_compact)
    }

    pub fn flags(&self) -> (bool, Option<usize>, bool, bool) {
        (
            self.commuting,
            self.nilpotency_order,
            self.solvable,
            self.solvable_plus_compact,
        )
    }
}

/// Radical of the algebra as the Killing-orthogonal complement of the
/// derived algebra, in coordinates (orthonormal columns).
pub fn radical_coords(basis: &LieAlgebraBasis, killing: &DMatrix<f64>) -> DMatrix<f64> {
    let full = basis.full();
    let derived = basis.bracket_subspace(&full, &full);
    if derived.ncols() == 0 {
        return full;
    }
    let constraint = derived.transpose() * killing;
    let scale = 1.0 + killing.norm();
    null_space(&constraint, basis.tol() * scale)
}

/// Classifies the algebra generated by `family`.
///
/// The radical is `[g, g]^⊥` under the Killing form. Compactness of the
/// semisimple part is tested on a complement of `r ∩ [g, g]` inside `[g, g]`,
/// where the Killing form of `g` agrees with its restriction to a Levi factor.
pub fn classify(family: &MatrixFamily) -> AlgebraClassification {
    let basis = generate_algebra(family);
    classify_basis(family, &basis)
}

pub fn classify_basis(family: &MatrixFamily, basis: &LieAlgebraBasis) -> AlgebraClassification {
    let d = basis.dim();
    let commuting = family.len() == 1 || is_commuting(family);
    let mut nilpotency = nilpotency_order(basis);
    let mut solvable = is_solvable(basis);
    // Implications hold exactly; tolerance-boundary disagreements between
    // the independent tests are resolved toward the stronger evidence.
    if commuting {
        nilpotency = Some(1);
    }
    if nilpotency.is_some() {
        solvable = true;
    }

    let killing = basis.killing_form();
    let scale = 1.0 + killing.norm();
    let thr = basis.tol() * scale;
    let full = basis.full();

    let radical = if solvable {
        full.clone()
    } else {
        radical_coords(basis, &killing)
    };

    let killing_spectrum = if radical.ncols() == d {
        Vec::new()
    } else {
        let derived = basis.bracket_subspace(&full, &full);
        // r ∩ [g,g]: vectors of [g,g] with no component outside r.
        let outside = &derived - &radical * (radical.transpose() * &derived);
        let inter = &derived * null_space(&outside, thr);
        let inter = range_basis(&inter, thr);
        let comp = complement_in(&derived, &inter, thr);
        let restricted = comp.transpose() * &killing * &comp;
        let mut ev: Vec<f64> = SymmetricEigen::new(crate::linalg::sym(&restricted))
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    };

    let compact = killing_spectrum.iter().all(|&v| v < -thr);
    let solvable_plus_compact = solvable || radical.ncols() == d || compact;

    let radical_basis = radical
        .column_iter()
        .map(|c| basis.element(&c.into_owned()))
        .collect();

    AlgebraClassification {
        dim: d,
        commuting,
        nilpotency_order: nilpotency,
        solvable,
        solvable_plus_compact,
        radical_basis,
        killing_spectrum,
    }
}
