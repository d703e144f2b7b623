#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use switchcert::linalg::spectral_abscissa;
use switchcert::MatrixFamily;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Random Hurwitz matrix with spectral abscissa in `[-1.5, -0.5]`.
pub fn hurwitz(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = gaussian(rng, n) / (n as f64).sqrt();
    let shift = spectral_abscissa(&m) + rng.gen_range(0.5..1.5);
    m - DMatrix::identity(n, n) * shift
}

/// Well-conditioned random similarity `I + 0.3 G / sqrt(n)`.
pub fn similarity(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n) + gaussian(rng, n) * (0.3 / (n as f64).sqrt())
}

/// Commuting Hurwitz family `S D_p S^{-1}` plus the data it was built from.
pub struct CommutingFamily {
    pub family: MatrixFamily,
    pub s: DMatrix<f64>,
    pub diagonals: Vec<DVector<f64>>,
}

pub fn commuting_family(rng: &mut ChaCha8Rng, n: usize, m: usize) -> CommutingFamily {
    let s = similarity(rng, n);
    let s_inv = s.clone().try_inverse().expect("invertible similarity");
    let diagonals: Vec<DVector<f64>> = (0..m)
        .map(|_| DVector::from_fn(n, |_, _| -rng.gen_range(0.5..3.0)))
        .collect();
    let modes = diagonals
        .iter()
        .map(|d| &s * DMatrix::from_diagonal(d) * &s_inv)
        .collect();
    CommutingFamily {
        family: MatrixFamily::new(modes).unwrap(),
        s,
        diagonals,
    }
}

/// Upper-triangular Hurwitz modes conjugated by a random similarity.
pub struct SolvableFamily {
    pub family: MatrixFamily,
    pub diagonals: Vec<Vec<f64>>,
}

pub fn solvable_family(rng: &mut ChaCha8Rng, n: usize, m: usize) -> SolvableFamily {
    let s = similarity(rng, n);
    let s_inv = s.clone().try_inverse().expect("invertible similarity");
    let mut diagonals = Vec::new();
    let modes = (0..m)
        .map(|_| {
            let mut u = DMatrix::zeros(n, n);
            let mut d = Vec::new();
            for i in 0..n {
                u[(i, i)] = -rng.gen_range(0.5..3.0);
                d.push(u[(i, i)]);
                for j in (i + 1)..n {
                    u[(i, j)] = rng.gen_range(-2.0..2.0);
                }
            }
            diagonals.push(d);
            &s * u * &s_inv
        })
        .collect();
    SolvableFamily {
        family: MatrixFamily::new(modes).unwrap(),
        diagonals,
    }
}

pub fn unit(n: usize, i: usize, j: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    m[(i, j)] = 1.0;
    m
}

/// Pair whose bracket commutes with both members, from the 3x3 Heisenberg
/// algebra plus scalar shifts, conjugated by a random similarity.
pub fn heisenberg_pair(rng: &mut ChaCha8Rng) -> (DMatrix<f64>, DMatrix<f64>) {
    let s = similarity(rng, 3);
    let s_inv = s.clone().try_inverse().unwrap();
    let mut make = || {
        DMatrix::identity(3, 3) * -rng.gen_range(0.2..1.0)
            + unit(3, 0, 1) * rng.gen_range(-1.0..1.0)
            + unit(3, 1, 2) * rng.gen_range(-1.0..1.0)
            + unit(3, 0, 2) * rng.gen_range(-1.0..1.0)
    };
    let (a, b) = (make(), make());
    (&s * a * &s_inv, &s * b * &s_inv)
}

/// `A_1 = [[-ε, 1], [-a, -ε]]`, `A_2 = [[-ε, a], [-1, -ε]]`: two foci rotating
/// the same way with ellipses elongated along orthogonal axes.
pub fn planar_pair(a: f64, eps: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    (
        DMatrix::from_row_slice(2, 2, &[-eps, 1.0, -a, -eps]),
        DMatrix::from_row_slice(2, 2, &[-eps, a, -1.0, -eps]),
    )
}

/// Infeasibility test for a common quadratic Lyapunov function of two
/// planar Hurwitz matrices: none exists iff `A_1 A_2` or `A_1 A_2^{-1}` has a
/// negative real eigenvalue.
pub fn planar_qclf_exists(a1: &DMatrix<f64>, a2: &DMatrix<f64>) -> bool {
    let bad = |m: DMatrix<f64>| {
        let tr = m.trace();
        let det = m.determinant();
        let disc = tr * tr - 4.0 * det;
        disc >= 0.0 && (tr - disc.sqrt()) / 2.0 < 0.0
    };
    let inv = a2.clone().try_inverse().unwrap();
    !(bad(a1 * a2) || bad(a1 * inv))
}

/// Random perturbation with prescribed spectral norm.
pub fn perturbation(rng: &mut ChaCha8Rng, n: usize, norm: f64) -> DMatrix<f64> {
    let g = gaussian(rng, n);
    let s = g.clone().singular_values().max();
    g * (norm / s)
}

pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}
