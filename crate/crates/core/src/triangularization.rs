//! Simultaneous upper-triangularization of a solvable family (Lie's theorem)
//! by recursive deflation on common eigenvectors.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::family::MatrixFamily;
use crate::lie_algebra::{generate_algebra, is_solvable, LieAlgebraBasis};
use crate::linalg::complex_matrix;
use crate::lyapunov::{triangular_diagonal_weights, QuadraticCertificate};

type CMat = DMatrix<Complex64>;
type CVec = DVector<Complex64>;

/// Relative threshold for eigenspace rank decisions.
const EIGENSPACE_RTOL: f64 = 1e-8;
/// Accepted residual for a common eigenvector of unit-norm matrices.
const EIGVEC_RESIDUAL: f64 = 1e-7;
/// Bound on explored nodes in the eigenvalue-choice search.
const MAX_SEARCH_NODES: usize = 20_000;

#[derive(Debug, Clone)]
pub struct TriangularizationResult {
    /// `T` with `T A_p T^{-1}` upper triangular. Unitary by construction.
    pub transform: CMat,
    pub triangular_modes: Vec<CMat>,
    /// Largest below-diagonal magnitude over all triangularized modes.
    pub residual: f64,
    /// 2-norm condition number of `T`.
    pub condition: f64,
}

fn spectral_norm_c(a: &CMat) -> f64 {
    a.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

/// Max over matrices of `‖A v - (v^* A v) v‖` for unit `v`.
fn eigen_residual(mats: &[CMat], v: &CVec) -> f64 {
    mats.iter()
        .map(|a| {
            let av = a * v;
            let lambda = v.dotc(&av);
            (av - v * lambda).norm()
        })
        .fold(0.0, f64::max)
}

fn eigenvalues_c(m: &CMat) -> Vec<Complex64> {
    if m.nrows() == 1 {
        return vec![m[(0, 0)]];
    }
    Schur::new(m.clone())
        .eigenvalues()
        .map(|v| v.iter().copied().collect())
        .unwrap_or_default()
}

/// Candidate eigenvalues: raw values plus cluster means at coarser radii, so
/// that defective (Jordan) clusters are represented by their accurate mean.
fn candidate_eigenvalues(m: &CMat) -> Vec<Complex64> {
    let raw = eigenvalues_c(m);
    let scale = 1.0 + m.norm();
    let mut out: Vec<Complex64> = Vec::new();
    let mut push = |z: Complex64| {
        if !out.iter().any(|w| (w - z).norm() <= 1e-13 * scale) {
            out.push(z);
        }
    };
    for z in &raw {
        push(*z);
    }
    for radius in [1e-9, 1e-7, 1e-5, 1e-3, 1e-2] {
        let r = radius * scale;
        let mut assigned = vec![false; raw.len()];
        for i in 0..raw.len() {
            if assigned[i] {
                continue;
            }
            // single-linkage cluster growth
            let mut members = vec![i];
            assigned[i] = true;
            let mut k = 0;
            while k < members.len() {
                let zi = raw[members[k]];
                for j in 0..raw.len() {
                    if !assigned[j] && (raw[j] - zi).norm() <= r {
                        assigned[j] = true;
                        members.push(j);
                    }
                }
                k += 1;
            }
            if members.len() > 1 {
                let sum: Complex64 = members.iter().map(|&j| raw[j]).sum();
                push(sum / members.len() as f64);
            }
        }
    }
    out
}

/// Orthonormal basis of `{S y : (B - λ) S y = 0}` (numerically).
fn restricted_kernel(b: &CMat, s: &CMat, lambda: Complex64, thr: f64) -> CMat {
    let k = s.ncols();
    let n = s.nrows();
    let shifted = b - CMat::identity(n, n) * lambda;
    let m = &shifted * s;
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("requested V^*");
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, sv)| **sv <= thr)
        .map(|(i, _)| i)
        .collect();
    let y = CMat::from_fn(k, keep.len(), |i, j| v_t[(keep[j], i)].conj());
    s * y
}

struct Search<'a> {
    mats: &'a [CMat],
    nodes: usize,
    best: f64,
}

impl Search<'_> {
    fn run(&mut self, idx: usize, s: CMat) -> Option<CVec> {
        self.nodes += 1;
        if self.nodes > MAX_SEARCH_NODES {
            return None;
        }
        if idx == self.mats.len() {
            let v = s.column(0).into_owned();
            let v = &v / Complex64::new(v.norm(), 0.0);
            let res = eigen_residual(self.mats, &v);
            self.best = self.best.min(res);
            return (res <= EIGVEC_RESIDUAL).then_some(v);
        }
        let b = &self.mats[idx];
        let bn = spectral_norm_c(b);
        if bn <= 1e-14 {
            return self.run(idx + 1, s);
        }
        let thr = EIGENSPACE_RTOL * bn;
        let compressed = s.adjoint() * b * &s;
        let mut options: Vec<(Complex64, CMat)> = Vec::new();
        for lambda in candidate_eigenvalues(&compressed) {
            let mut sub = restricted_kernel(b, &s, lambda, thr);
            if sub.ncols() == 0 {
                continue;
            }
            // Rayleigh refinement of the eigenvalue on the found subspace.
            let refined = (sub.adjoint() * b * &sub).trace() / sub.ncols() as f64;
            let again = restricted_kernel(b, &s, refined, thr);
            let lambda = if again.ncols() >= sub.ncols() {
                sub = again;
                refined
            } else {
                lambda
            };
            if options
                .iter()
                .any(|(l, o)| (l - lambda).norm() <= 1e-10 * (1.0 + bn) && o.ncols() == sub.ncols())
            {
                continue;
            }
            options.push((lambda, sub));
        }
        // Larger eigenspaces first; ties by (re, im).
        options.sort_by(|(la, sa), (lb, sb)| {
            sb.ncols()
                .cmp(&sa.ncols())
                .then(la.re.total_cmp(&lb.re))
                .then(la.im.total_cmp(&lb.im))
        });
        for (_, sub) in options {
            if let Some(v) = self.run(idx + 1, sub) {
                return Some(v);
            }
        }
        None
    }
}

/// Common eigenvector of a list of square complex matrices, with the
/// residual it achieves.
pub fn common_eigenvector_of(mats: &[CMat]) -> Result<(CVec, f64)> {
    let n = mats.first().map_or(0, |m| m.nrows());
    if n == 0 {
        return Err(Error::InvalidArgument("no matrices".into()));
    }
    let normalized: Vec<CMat> = mats
        .iter()
        .map(|m| {
            let nm = m.norm();
            if nm > 0.0 {
                m / Complex64::new(nm, 0.0)
            } else {
                m.clone()
            }
        })
        .collect();
    let mut search = Search {
        mats: &normalized,
        nodes: 0,
        best: f64::INFINITY,
    };
    match search.run(0, CMat::identity(n, n)) {
        Some(v) => {
            let res = eigen_residual(&normalized, &v);
            Ok((v, res))
        }
        None => Err(Error::NoCommonEigenvector {
            residual: search.best,
        }),
    }
}

/// Unit vector `v` that is an eigenvector of every element of a solvable
/// algebra.
pub fn common_eigenvector(basis: &LieAlgebraBasis) -> Result<CVec> {
    if !is_solvable(basis) {
        return Err(Error::NotSolvable);
    }
    let mats: Vec<CMat> = basis.basis().iter().map(complex_matrix).collect();
    common_eigenvector_of(&mats).map(|(v, _)| v)
}

/// Unitary Householder reflector whose first column is `v` up to a phase.
fn householder_completion(v: &CVec) -> CMat {
    let k = v.len();
    let v1 = v[0];
    let phase = if v1.norm() > 0.0 {
        v1 / v1.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let alpha = -phase;
    let mut u = v.clone();
    u[0] -= alpha;
    let uu = u.dotc(&u).re;
    let mut h = CMat::identity(k, k);
    h -= (&u * u.adjoint()) * Complex64::new(2.0 / uu, 0.0);
    h
}

fn below_diagonal_max(m: &CMat) -> f64 {
    let n = m.nrows();
    (0..n)
        .flat_map(|i| (0..i).map(move |j| (i, j)))
        .map(|(i, j)| m[(i, j)].norm())
        .fold(0.0, f64::max)
}

/// Unitary `U` whose columns form a flag invariant under every matrix in
/// `mats` (each `U^* M U` upper triangular).
pub fn triangularizing_unitary(mats: &[CMat]) -> Result<CMat> {
    let n = mats.first().map_or(0, |m| m.nrows());
    let mut u = CMat::identity(n, n);
    let mut current: Vec<CMat> = mats.to_vec();
    for depth in 0..n.saturating_sub(1) {
        let k = n - depth;
        let (v, _) = common_eigenvector_of(&current).map_err(|e| match e {
            Error::NoCommonEigenvector { residual } => Error::DeflationFailure { depth, residual },
            other => other,
        })?;
        let h = householder_completion(&v);
        let mut embed = CMat::identity(n, n);
        embed.view_mut((depth, depth), (k, k)).copy_from(&h);
        u = &u * embed;
        current = current
            .iter()
            .map(|m| {
                let c = h.adjoint() * m * &h;
                c.view((1, 1), (k - 1, k - 1)).into_owned()
            })
            .collect();
    }
    Ok(u)
}

/// Complex change of coordinates bringing every mode to upper-triangular form.
pub fn simultaneous_triangularize(family: &MatrixFamily) -> Result<TriangularizationResult> {
    let basis = generate_algebra(family);
    if !is_solvable(&basis) {
        return Err(Error::NotSolvable);
    }
    let mats: Vec<CMat> = basis.basis().iter().map(complex_matrix).collect();
    let u = triangularizing_unitary(&mats)?;
    let t = u.adjoint();
    let triangular_modes: Vec<CMat> = family
        .modes()
        .iter()
        .map(|a| &t * complex_matrix(a) * &u)
        .collect();
    let residual = triangular_modes.iter().map(below_diagonal_max).fold(0.0, f64::max);
    let scale = family.modes().iter().map(|a| a.norm()).fold(0.0, f64::max);
    if residual > 1e-7 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::DeflationFailure {
            depth: family.n(),
            residual,
        });
    }
    let sv = t.clone().singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(TriangularizationResult {
        transform: t,
        triangular_modes,
        residual,
        condition: smax / smin,
    })
}

/// Diagonal Hermitian certificate in triangular coordinates, pulled back to
/// the real quadratic form `Re(T^* D T)` in the original coordinates.
pub fn pullback_certificate(
    family: &MatrixFamily,
    tri: &TriangularizationResult,
) -> Result<QuadraticCertificate> {
    let d = triangular_diagonal_weights(&tri.triangular_modes)?;
    let dc = CMat::from_diagonal(&d.map(|v| Complex64::new(v, 0.0)));
    let pulled = tri.transform.adjoint() * dc * &tri.transform;
    let real = pulled.map(|z| z.re);
    QuadraticCertificate::from_p(real, family)
}

/// Triangularize then certify: the solvable-algebra route to a common
/// quadratic Lyapunov function.
pub fn solvable_certificate(
    family: &MatrixFamily,
) -> Result<(TriangularizationResult, QuadraticCertificate)> {
    let tri = simultaneous_triangularize(family)?;
    let cert = pullback_certificate(family, &tri)?;
    Ok((tri, cert))
}
