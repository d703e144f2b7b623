//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use common::*;
use switchcert::expm::expm_scaled;
use switchcert::lie_algebra::classify;
use switchcert::linalg::{lambda_max, lambda_min, spectral_norm, sym};
use switchcert::lyapunov::{
    check_common_lyapunov, find_qclf, nb_chain, nb_chain_matrix, solve_lyapunov, QclfSearch, QuadraticCertificate,
};
use switchcert::nonlinear::{angeli_fields, finite_escape_field, shim_lyapunov_eval, simulate_nonlinear, PolyVectorField};
use switchcert::simulation::{bch2_check, estimate_gues, simulate_exact, worst_case_planar, GuesEstimate, SwitchingSignal};
use switchcert::triangularization::{pullback_certificate, simultaneous_triangularize};
use switchcert::MatrixFamily;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

/// `∫_0^∞ e^{A^T t} Q e^{A t} dt` by 5-point Gauss–Legendre on a short panel
/// followed by repeated doubling `P_{2h} = P_h + E_h^T P_h E_h`.
fn lyapunov_by_quadrature(a: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    const NODES: [f64; 5] = [
        -0.906_179_845_938_664,
        -0.538_469_310_105_683,
        0.0,
        0.538_469_310_105_683,
        0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.236_926_885_056_189,
        0.478_628_670_499_366,
        0.568_888_888_888_889,
        0.478_628_670_499_366,
        0.236_926_885_056_189,
    ];
    let h = 1.0 / (8.0 * (1.0 + spectral_norm(a)));
    let mut p = DMatrix::zeros(a.nrows(), a.ncols());
    for (x, w) in NODES.iter().zip(WEIGHTS) {
        let e = expm_scaled(a, 0.5 * h * (x + 1.0));
        p += e.transpose() * q * &e * (0.5 * h * w);
    }
    let mut e = expm_scaled(a, h);
    for _ in 0..80 {
        p = &p + e.transpose() * &p * &e;
        e = &e * &e;
        if spectral_norm(&e) < 1e-9 {
            break;
        }
    }
    p
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = rng(101);
    let mut worst = 0.0f64;
    for k in 0..50 {
        let n = 2 + k % 7;
        let a = hurwitz(&mut rng, n);
        let g = gaussian(&mut rng, n);
        let q = &g * g.transpose() + DMatrix::identity(n, n);
        let p = solve_lyapunov(&a, &q).map_err(|e| e.to_string())?;
        let oracle = lyapunov_by_quadrature(&a, &q);
        worst = worst.max(rel_err(&p, &oracle));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst <= 1e-6, format!("max relative error {worst:.3e}"))?;
    ensure(secs < 10.0, format!("runtime {secs:.2}s"))?;
    Ok(format!("max rel err {worst:.2e} over 50 matrices, {secs:.2}s"))
}

fn permutations(m: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(m - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, m - 1);
            out.push(q);
        }
    }
    out
}

fn commuting_cases() -> Vec<CommutingFamily> {
    let mut rng = rng(202);
    (0..20)
        .map(|k| commuting_family(&mut rng, 2 + k % 4, 2 + k % 3))
        .collect()
}

fn solvable_cases() -> Vec<SolvableFamily> {
    let mut rng = rng(303);
    (0..20)
        .map(|k| solvable_family(&mut rng, 2 + k % 5, 1 + k % 3))
        .collect()
}

fn criterion_2() -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_margin = f64::NEG_INFINITY;
    for case in commuting_cases() {
        let family = &case.family;
        let reference = nb_chain_matrix(family).map_err(|e| e.to_string())?;
        for order in permutations(family.len()) {
            let permuted = family.permuted(&order).map_err(|e| e.to_string())?;
            let p = nb_chain_matrix(&permuted).map_err(|e| e.to_string())?;
            worst = worst.max(rel_err(&p, &reference));
            let margins = check_common_lyapunov(&p, family);
            worst_margin = margins.iter().copied().fold(worst_margin, f64::max);
        }
    }
    ensure(worst <= 1e-8, format!("order dependence {worst:.3e}"))?;
    ensure(worst_margin < 0.0, format!("margin {worst_margin:.3e} not negative"))?;
    Ok(format!("max rel diff {worst:.2e}, max margin {worst_margin:.3e}"))
}

fn below_diagonal(m: &DMatrix<Complex64>) -> f64 {
    let mut out = 0.0f64;
    for j in 0..m.ncols() {
        for i in (j + 1)..m.nrows() {
            out = out.max(m[(i, j)].norm());
        }
    }
    out
}

/// Largest distance in an optimal-by-greedy pairing of two spectra.
fn spectrum_distance(mut got: Vec<Complex64>, want: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for &w in want {
        let (idx, d) = got
            .iter()
            .enumerate()
            .map(|(i, z)| (i, (z - Complex64::new(w, 0.0)).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("same length");
        got.swap_remove(idx);
        worst = worst.max(d);
    }
    worst
}

fn criterion_3() -> Outcome {
    let mut worst_res = 0.0f64;
    let mut worst_eig = 0.0f64;
    let mut worst_margin = f64::NEG_INFINITY;
    for case in solvable_cases() {
        let family = &case.family;
        let tri = simultaneous_triangularize(family).map_err(|e| e.to_string())?;
        let t_inv = tri.transform.clone().try_inverse().ok_or("singular transform")?;
        let scale = family.modes().iter().map(spectral_norm).fold(0.0, f64::max);
        for (p, a) in family.modes().iter().enumerate() {
            let ac = a.map(|v| Complex64::new(v, 0.0));
            let t = &tri.transform * ac * &t_inv;
            worst_res = worst_res.max(below_diagonal(&t) / scale);
            let diag: Vec<Complex64> = t.diagonal().iter().copied().collect();
            worst_eig = worst_eig.max(spectrum_distance(diag, &case.diagonals[p]));
        }
        let cert = pullback_certificate(family, &tri).map_err(|e| e.to_string())?;
        ensure(lambda_min(&cert.p) > 0.0, "pulled-back P not positive definite")?;
        let margins = check_common_lyapunov(&cert.p, family);
        worst_margin = margins.iter().copied().fold(worst_margin, f64::max);
    }
    ensure(worst_res <= 1e-7, format!("below-diagonal residual {worst_res:.3e}·scale"))?;
    ensure(worst_eig <= 1e-7, format!("eigenvalue drift {worst_eig:.3e}"))?;
    ensure(worst_margin < 0.0, format!("margin {worst_margin:.3e} not negative"))?;
    Ok(format!(
        "residual {worst_res:.2e}·scale, eigen drift {worst_eig:.2e}, max margin {worst_margin:.3e}"
    ))
}

fn skew3(rng: &mut rand_chacha::ChaCha8Rng) -> DMatrix<f64> {
    let (a, b, c) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    DMatrix::from_row_slice(3, 3, &[0.0, -c, b, c, 0.0, -a, -b, a, 0.0])
}

fn fuzz_family(rng: &mut rand_chacha::ChaCha8Rng, k: usize) -> MatrixFamily {
    match k % 6 {
        0 => {
            let n = 2 + k % 3;
            MatrixFamily::new(vec![gaussian(rng, n), gaussian(rng, n)]).unwrap()
        }
        1 => commuting_family(rng, 2 + k % 3, 2 + k % 2).family,
        2 => solvable_family(rng, 2 + k % 4, 2 + k % 2).family,
        3 => {
            let (a, b) = heisenberg_pair(rng);
            MatrixFamily::new(vec![a, b]).unwrap()
        }
        4 => {
            let s = similarity(rng, 3);
            let s_inv = s.clone().try_inverse().unwrap();
            let modes = (0..2)
                .map(|_| &s * (skew3(rng) - DMatrix::identity(3, 3) * rng.gen_range(0.5..2.0)) * &s_inv)
                .collect();
            MatrixFamily::new(modes).unwrap()
        }
        _ => MatrixFamily::new(vec![gaussian(rng, 3), gaussian(rng, 3), gaussian(rng, 3)]).unwrap(),
    }
}

fn criterion_4() -> Outcome {
    let mut rng = rng(404);
    let mut counts = [0usize; 4];
    for k in 0..200 {
        let family = fuzz_family(&mut rng, k);
        let base = classify(&family);
        ensure(base.is_monotone(), format!("family {k}: non-monotone flags {:?}", base.flags()))?;
        let s = similarity(&mut rng, family.n());
        let conj = classify(&family.conjugated(&s).unwrap());
        let order: Vec<usize> = (0..family.len()).rev().collect();
        let perm = classify(&family.permuted(&order).unwrap());
        for (name, other) in [("conjugation", &conj), ("permutation", &perm)] {
            ensure(
                other.flags() == base.flags() && other.dim == base.dim,
                format!(
                    "family {k}: {name} changed ({}, {:?}) to ({}, {:?})",
                    base.dim,
                    base.flags(),
                    other.dim,
                    other.flags()
                ),
            )?;
        }
        let (c, nil, sol, spc) = base.flags();
        counts[0] += c as usize;
        counts[1] += nil.is_some() as usize;
        counts[2] += sol as usize;
        counts[3] += spc as usize;
    }
    Ok(format!(
        "200 families; commuting {}, nilpotent {}, solvable {}, solvable+compact {}",
        counts[0], counts[1], counts[2], counts[3]
    ))
}

fn criterion_5() -> Outcome {
    let mut rng = rng(505);
    let grid = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (a, b) = heisenberg_pair(&mut rng);
        for &t in &grid {
            for &s in &grid {
                worst = worst.max(bch2_check(&a, &b, t, s).map_err(|e| e.to_string())?);
            }
        }
    }
    ensure(worst <= 1e-10, format!("nilpotent residual {worst:.3e}"))?;
    let draws = 100;
    let mut detected = 0;
    for _ in 0..draws {
        let (a, b) = (hurwitz(&mut rng, 3), hurwitz(&mut rng, 3));
        let mut r = 0.0f64;
        for &t in &grid {
            for &s in &grid {
                r = r.max(bch2_check(&a, &b, t, s).map_err(|e| e.to_string())?);
            }
        }
        detected += (r > 1e-3) as usize;
    }
    ensure(detected * 10 >= draws * 9, format!("generic pairs flagged {detected}/{draws}"))?;
    Ok(format!("nilpotent max residual {worst:.2e}; generic flagged {detected}/{draws}"))
}

fn perturbed_margins(p: &DMatrix<f64>, family: &MatrixFamily, deltas: &[DMatrix<f64>]) -> f64 {
    family
        .modes()
        .iter()
        .zip(deltas)
        .map(|(a, d)| {
            let b = a + d;
            lambda_max(&sym(&(p * &b + b.transpose() * p)))
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn criterion_6() -> Outcome {
    let mut certs: Vec<(MatrixFamily, QuadraticCertificate)> = Vec::new();
    for case in commuting_cases() {
        let cert = nb_chain(&case.family).map_err(|e| e.to_string())?;
        certs.push((case.family, cert));
    }
    for case in solvable_cases() {
        let tri = simultaneous_triangularize(&case.family).map_err(|e| e.to_string())?;
        let cert = pullback_certificate(&case.family, &tri).map_err(|e| e.to_string())?;
        certs.push((case.family, cert));
    }
    let mut rng = rng(606);
    let mut worst = f64::NEG_INFINITY;
    let mut sharp = 0;
    for (family, cert) in &certs {
        let n = family.n();
        let r = cert.robustness_radius;
        ensure(r > 0.0, "non-positive radius")?;
        for _ in 0..100 {
            let deltas: Vec<_> = (0..family.len()).map(|_| perturbation(&mut rng, n, 0.9 * r)).collect();
            worst = worst.max(perturbed_margins(&cert.p, family, &deltas));
        }
        let violated = (0..1000).any(|_| {
            let deltas: Vec<_> = (0..family.len()).map(|_| perturbation(&mut rng, n, 2.0 * r)).collect();
            perturbed_margins(&cert.p, family, &deltas) >= 0.0
        });
        sharp += violated as usize;
    }
    ensure(worst < 0.0, format!("margin {worst:.3e} at 0.9·radius"))?;
    Ok(format!(
        "{} certificates, max margin at 0.9·radius {worst:.3e}; sharpness probe at 2·radius violated for {sharp}/{} (report only)",
        certs.len(),
        certs.len()
    ))
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let (a1, a2) = planar_pair(2.0, 0.5);
    ensure(!planar_qclf_exists(&a1, &a2), "oracle says a quadratic certificate exists")?;
    let x0 = DVector::from_vec(vec![1.0, 0.0]);
    let wc = worst_case_planar(&a1, &a2, &x0, 3).map_err(|e| e.to_string())?;
    ensure(
        wc.contraction_per_rotation < 1.0,
        format!("contraction {:.4} not below 1", wc.contraction_per_rotation),
    )?;
    let family = MatrixFamily::new(vec![a1, a2]).unwrap();
    let found = find_qclf(&family, &QclfSearch::default()).map_err(|e| e.to_string())?;
    ensure(found.is_none(), "search returned a certificate for an infeasible pair")?;

    let (b1, b2) = planar_pair(10.0, 0.1);
    let wc_big = worst_case_planar(&b1, &b2, &x0, 3).map_err(|e| e.to_string())?;
    ensure(
        wc_big.contraction_per_rotation > 1.0,
        format!("scaled contraction {:.4} not above 1", wc_big.contraction_per_rotation),
    )?;
    let big = MatrixFamily::new(vec![b1, b2]).unwrap();
    let est = estimate_gues(&big, 50, 50.0, 7).map_err(|e| e.to_string())?;
    let witness = match est {
        GuesEstimate::GrowthWitness { trial, trajectory } => format!("trial {trial} reached {:.2e}", trajectory.max_norm()),
        GuesEstimate::Envelope { .. } => return Err("no growth witness for the scaled pair".into()),
    };
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 30.0, format!("runtime {secs:.2}s"))?;
    Ok(format!(
        "contraction {:.4} (no QCLF), scaled {:.2} with {witness}, {secs:.2}s",
        wc.contraction_per_rotation, wc_big.contraction_per_rotation
    ))
}

fn criterion_8() -> Outcome {
    let x0 = DVector::from_vec(vec![3.0, 3.0]);
    let horizon = SwitchingSignal::constant(0, 30.0).unwrap();
    let escape = simulate_nonlinear(&[finite_escape_field()], &horizon, &x0, 1e-3).map_err(|e| e.to_string())?;
    let esc = escape.escape.ok_or("escape system did not escape")?;

    let [f1, f2] = angeli_fields();
    let mut rng = rng(808);
    let mut worst = 0.0f64;
    for f in [&f1, &f2] {
        for _ in 0..20 {
            let start = DVector::from_fn(2, |_, _| rng.gen_range(-3.0..3.0));
            let traj = simulate_nonlinear(std::slice::from_ref(f), &horizon, &start, 1e-3).map_err(|e| e.to_string())?;
            ensure(traj.escape.is_none(), format!("stable field escaped from {start:?}"))?;
            worst = worst.max(traj.final_state().norm());
        }
    }
    ensure(worst < 1e-3, format!("|x(30)| = {worst:.3e}"))?;
    let average: PolyVectorField = f1.convex_combination(&f2, 0.5).map_err(|e| e.to_string())?;
    let avg = simulate_nonlinear(&[average], &horizon, &x0, 1e-3).map_err(|e| e.to_string())?;
    let avg_esc = avg.escape.ok_or("convex combination did not escape")?;
    Ok(format!(
        "escape in [{:.4}, {:.4}]; Angeli fields max |x(30)| {worst:.2e}; average escapes in [{:.4}, {:.4}]",
        esc.lo, esc.hi, avg_esc.lo, avg_esc.hi
    ))
}

fn criterion_9() -> Outcome {
    let mut rng = rng(909);
    let s = similarity(&mut rng, 2);
    let s_inv = s.clone().try_inverse().unwrap();
    let a1 = &s * DMatrix::from_row_slice(2, 2, &[-0.7, 0.0, 0.0, -1.2]) * &s_inv;
    let a2 = &s * DMatrix::from_row_slice(2, 2, &[-1.1, 0.0, 0.0, -0.6]) * &s_inv;
    let family = MatrixFamily::new(vec![a1.clone(), a2.clone()]).unwrap();
    let p2 = nb_chain_matrix(&family).map_err(|e| e.to_string())?;
    let fields = [PolyVectorField::linear(&a1).unwrap(), PolyVectorField::linear(&a2).unwrap()];
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let x = gaussian_vec(&mut rng, 2);
        let v = shim_lyapunov_eval(&fields, &x, 30.0, 601).map_err(|e| e.to_string())?;
        let exact = x.dot(&(&p2 * &x));
        worst = worst.max((v - exact).abs() / exact);
    }
    ensure(worst <= 1e-4, format!("relative error {worst:.3e}"))?;
    Ok(format!("max relative error {worst:.2e} at 20 points"))
}

fn criterion_10() -> Outcome {
    let mut rng = rng(1010);
    let mut worst = 0.0f64;
    for k in 0..50 {
        let case = commuting_family(&mut rng, 2 + k % 4, 2);
        let segments = rng.gen_range(1..=50);
        let pairs: Vec<(usize, f64)> = (0..segments)
            .map(|_| (rng.gen_range(0..2), rng.gen_range(0.01..1.0)))
            .collect();
        let signal = SwitchingSignal::from_pairs(&pairs).unwrap();
        let x0 = gaussian_vec(&mut rng, case.family.n());
        let end = simulate_exact(&case.family, &signal, &x0).map_err(|e| e.to_string())?;
        let totals = signal.activation_times(2);
        let exponent = &case.diagonals[0] * totals[0] + &case.diagonals[1] * totals[1];
        let s_inv = case.s.clone().try_inverse().unwrap();
        let oracle = &case.s * DMatrix::from_diagonal(&exponent.map(f64::exp)) * s_inv * &x0;
        worst = worst.max((end.final_state() - &oracle).norm() / oracle.norm());
    }
    ensure(worst <= 1e-9, format!("relative error {worst:.3e}"))?;
    Ok(format!("max relative error {worst:.2e} over 50 signals"))
}

fn main() {
    // Silence the default hook; failures are reported through the summary.
    std::panic::set_hook(Box::new(|_| {}));
    let criteria: [Criterion; 10] = [
        ("Lyapunov solver vs quadrature oracle", criterion_1),
        ("NB-chain order invariance", criterion_2),
        ("triangularization pipeline", criterion_3),
        ("classification hierarchy fuzz", criterion_4),
        ("BCH identity for second-order nilpotent pairs", criterion_5),
        ("robustness radius", criterion_6),
        ("worst-case planar switching", criterion_7),
        ("nonlinear regression", criterion_8),
        ("nested Lyapunov construction", criterion_9),
        ("commuting rearrangement", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("acceptance {:>2} PASS {name} ({secs:.2}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("acceptance {:>2} FAIL {name} ({secs:.2}s): {detail}", i + 1);
            }
        }
    }
    println!("acceptance summary: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
