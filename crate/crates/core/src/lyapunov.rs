//! Quadratic common Lyapunov functions: construction, validation and
//! robustness radii.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::MatrixFamily;
use crate::linalg::{clip_eigenvalues, ensure_hurwitz, lambda_max, lambda_min, sym, top_eigenpair};

/// `V(x) = x^T P x` together with the evidence that it decreases along
/// every mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticCertificate {
    #[serde(with = "crate::serde_rows")]
    pub p: DMatrix<f64>,
    /// `λ_max(P A_p + A_p^T P)` per mode.
    pub margins: Vec<f64>,
    /// `Q` with `P A_p + A_p^T P <= -Q` for every mode.
    #[serde(with = "crate::serde_rows")]
    pub q_floor: DMatrix<f64>,
    pub robustness_radius: f64,
}

impl QuadraticCertificate {
    /// Builds a certificate for `p`, extracting the tightest isotropic floor
    /// `Q = μ I` with `μ = -max_p margin`. Fails unless `P > 0` and every
    /// margin is negative.
    pub fn from_p(p: DMatrix<f64>, family: &MatrixFamily) -> Result<Self> {
        let p = sym(&p);
        let margins = check_common_lyapunov(&p, family);
        if lambda_min(&p) <= 0.0 || margins.iter().any(|m| *m >= 0.0) {
            return Err(Error::CertificateInvalid { margins });
        }
        let mu = -margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let n = p.nrows();
        let q_floor = DMatrix::identity(n, n) * mu;
        let robustness_radius = radius(&p, &q_floor);
        Ok(Self {
            p,
            margins,
            q_floor,
            robustness_radius,
        })
    }

    /// Revalidates against `family`: `P > 0` and all margins negative.
    pub fn is_valid_for(&self, family: &MatrixFamily) -> bool {
        lambda_min(&self.p) > 0.0 && check_common_lyapunov(&self.p, family).iter().all(|m| *m < 0.0)
    }
}

/// Solves `P A + A^T P = -Q` through the Kronecker-sum linear system.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if q.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            rows: q.nrows(),
            cols: q.ncols(),
        });
    }
    if (q - q.transpose()).norm() > 1e-12 * (1.0 + q.norm()) || lambda_min(q) <= 0.0 {
        return Err(Error::InvalidArgument("Q must be symmetric positive definite".into()));
    }
    ensure_hurwitz(a)?;

    let id = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    let system = at.kronecker(&id) + id.kronecker(&at);
    let rhs = DVector::from_iterator(n * n, q.iter().map(|v| -v));
    let vec_p = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NumericalFailure("singular Kronecker-sum system".into()))?;
    let p = sym(&DMatrix::from_column_slice(n, n, vec_p.as_slice()));

    let residual = (&p * a + a.transpose() * &p + q).norm();
    if residual > 1e-8 * q.norm() {
        return Err(Error::NumericalFailure(format!(
            "Lyapunov residual {residual:.3e} exceeds tolerance"
        )));
    }
    if lambda_min(&p) <= 0.0 {
        return Err(Error::NumericalFailure("Lyapunov solution is not positive definite".into()));
    }
    Ok(p)
}

/// `λ_max(P A_p + A_p^T P)` for each mode.
pub fn check_common_lyapunov(p: &DMatrix<f64>, family: &MatrixFamily) -> Vec<f64> {
    family
        .modes()
        .iter()
        .map(|a| lambda_max(&(p * a + a.transpose() * p)))
        .collect()
}

/// Iterated Lyapunov equations `P_1 A_1 + A_1^T P_1 = -I`,
/// `P_i A_i + A_i^T P_i = -P_{i-1}`; certificate built from `P_m`.
pub fn nb_chain_matrix(family: &MatrixFamily) -> Result<DMatrix<f64>> {
    family.ensure_hurwitz()?;
    let n = family.n();
    let mut rhs = DMatrix::<f64>::identity(n, n);
    for (p, a) in family.modes().iter().enumerate() {
        rhs = solve_lyapunov(a, &rhs).map_err(|e| match e {
            Error::NotHurwitz { max_real, .. } => Error::NotHurwitz { mode: p, max_real },
            other => other,
        })?;
    }
    Ok(rhs)
}

pub fn nb_chain(family: &MatrixFamily) -> Result<QuadraticCertificate> {
    QuadraticCertificate::from_p(nb_chain_matrix(family)?, family)
}

fn radius(p: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    (lambda_min(q) / (2.0 * lambda_max(p))).max(0.0)
}

/// `λ_min(Q) / (2 λ_max(P))`: perturbations `‖Δ_p‖_2` below this keep the
/// certificate valid.
pub fn robustness_radius(cert: &QuadraticCertificate) -> f64 {
    radius(&cert.p, &cert.q_floor)
}

/// Options for the projected-subgradient search over `P`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QclfSearch {
    pub max_iters: usize,
    pub step: f64,
    /// Geometric step decay per iteration.
    pub decay: f64,
    /// Eigenvalue floor for `P` and the required margin slack.
    pub epsilon: f64,
    pub seed: u64,
    /// Number of starting points sharing the iteration budget.
    pub restarts: usize,
}

impl Default for QclfSearch {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            step: 0.1,
            decay: 0.999,
            epsilon: 1e-6,
            seed: 0,
            restarts: 4,
        }
    }
}

impl QclfSearch {
    pub fn with_budget(max_iters: usize, step: f64, seed: u64) -> Self {
        Self {
            max_iters,
            step,
            seed,
            ..Self::default()
        }
    }
}

fn normalize_trace(p: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    p * (n as f64 / p.trace())
}

fn project(p: &DMatrix<f64>, n: usize, eps: f64) -> DMatrix<f64> {
    let mut out = normalize_trace(&clip_eigenvalues(p, eps), n);
    if lambda_min(&out) < eps {
        out = normalize_trace(&clip_eigenvalues(&out, eps), n);
    }
    out
}

/// Heuristic search for a quadratic common Lyapunov function.
///
/// Projected subgradient descent on `max_p λ_max(P A_p + A_p^T P)` over
/// `{P : P >= εI, tr P = n}`: each step moves against the outer-product
/// direction of the worst mode's top eigenvector. `None` means the search
/// was inconclusive, not that no quadratic certificate exists.
pub fn find_qclf(family: &MatrixFamily, opts: &QclfSearch) -> Result<Option<QuadraticCertificate>> {
    family.ensure_hurwitz()?;
    let n = family.n();
    let eps = opts.epsilon;
    let restarts = opts.restarts.max(1);
    let per_restart = (opts.max_iters / restarts).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    for r in 0..restarts {
        let start = if r == 0 {
            let mut acc = DMatrix::<f64>::zeros(n, n);
            for a in family.modes() {
                let pa = solve_lyapunov(a, &DMatrix::identity(n, n))?;
                acc += &pa / pa.trace();
            }
            acc
        } else {
            let g = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
            &g * g.transpose() + DMatrix::identity(n, n) * 0.1
        };
        let mut p = project(&start, n, eps);
        let mut step = opts.step;
        for _ in 0..per_restart {
            let mut worst = (f64::NEG_INFINITY, 0usize, DVector::zeros(n));
            for (idx, a) in family.modes().iter().enumerate() {
                let (val, v) = top_eigenpair(&(&p * a + a.transpose() * &p));
                if val > worst.0 {
                    worst = (val, idx, v);
                }
            }
            if worst.0 < -eps {
                return Ok(QuadraticCertificate::from_p(p, family).ok());
            }
            let a = family.mode(worst.1);
            let v = &worst.2;
            let av = a * v;
            let g = sym(&(&av * v.transpose() * 2.0));
            let gn = g.norm();
            if gn == 0.0 {
                break;
            }
            p = project(&(&p - g * (step / gn)), n, eps);
            step *= opts.decay;
        }
    }
    Ok(None)
}

/// Diagonal entries of a diagonal `P` that certifies a family of complex
/// upper-triangular matrices (Hermitian form `x^* P x`).
///
/// Top-down: `d_1 = 1`, then each `d_i` is twice the Schur-complement bound
/// that keeps the leading `i x i` minor of `-(A^* P + P A)` positive for every
/// mode. The result is rescaled so that `d_n = 1`.
pub fn triangular_diagonal_weights(modes: &[DMatrix<Complex64>]) -> Result<DVector<f64>> {
    let n = modes.first().map_or(0, |a| a.nrows());
    for (p, a) in modes.iter().enumerate() {
        for i in 0..n {
            if a[(i, i)].re >= -1e-10 * (1.0 + a.norm()) {
                return Err(Error::NotHurwitz {
                    mode: p,
                    max_real: a[(i, i)].re,
                });
            }
        }
    }
    let mut d = vec![1.0f64; n];
    for i in 1..n {
        let mut bound = 0.0f64;
        for a in modes {
            let lead = leading_block(a, &d, i);
            let chol = Cholesky::new(lead)
                .ok_or_else(|| Error::NumericalFailure("leading minor lost definiteness".into()))?;
            let c = DVector::from_fn(i, |j, _| -a[(j, i)] * d[j]);
            let y = chol.solve(&c);
            let quad = c.dotc(&y).re;
            let alpha = -a[(i, i)].re;
            bound = bound.max(quad / (2.0 * alpha));
        }
        d[i] = d[i - 1].max(2.0 * bound);
    }
    let last = d[n - 1];
    Ok(DVector::from_iterator(n, d.into_iter().map(|v| v / last)))
}

/// Leading `k x k` block of `-(A^* P + P A)` for `P = diag(d)`.
fn leading_block(a: &DMatrix<Complex64>, d: &[f64], k: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(k, k, |r, c| {
        let pa = a[(r, c)] * d[r];
        let ap = a[(c, r)].conj() * d[c];
        -(pa + ap)
    })
}

/// Diagonal certificate for a real upper-triangular Hurwitz family.
pub fn diagonal_qclf_triangular(family: &MatrixFamily) -> Result<QuadraticCertificate> {
    for (p, a) in family.modes().iter().enumerate() {
        let tol = family.tol() * (1.0 + a.norm());
        let below = (0..family.n())
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].abs())
            .fold(0.0, f64::max);
        if below > tol {
            return Err(Error::NotTriangular {
                mode: p,
                magnitude: below,
            });
        }
    }
    let modes: Vec<DMatrix<Complex64>> = family
        .modes()
        .iter()
        .map(|a| {
            // drop sub-tolerance noise below the diagonal
            DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| {
                Complex64::new(if i > j { 0.0 } else { a[(i, j)] }, 0.0)
            })
        })
        .collect();
    let d = triangular_diagonal_weights(&modes)?;
    QuadraticCertificate::from_p(DMatrix::from_diagonal(&d), family)
}
