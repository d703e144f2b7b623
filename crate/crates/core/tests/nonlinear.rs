mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use switchcert::nonlinear::{
    flow_at_times, is_commuting_fields, jacobian_at_origin, poly_bracket, shim_lyapunov_detail, shim_lyapunov_eval,
    simulate_nonlinear, AdaptiveTol, PolyVectorField, TermSpec,
};
use switchcert::simulation::{simulate_exact, SwitchingSignal};
use switchcert::MatrixFamily;

fn term(component: usize, coeff: f64, powers: &[u32]) -> TermSpec {
    TermSpec {
        component,
        coeff,
        powers: powers.to_vec(),
        trig: None,
    }
}

fn field(n: usize, terms: &[TermSpec]) -> PolyVectorField {
    PolyVectorField::from_terms(n, terms).unwrap()
}

/// `(Dg) f - (Df) g` at `x` with central-difference Jacobians.
fn bracket_by_differences(f: &PolyVectorField, g: &PolyVectorField, x: &DVector<f64>) -> DVector<f64> {
    let n = x.len();
    let h = 1e-5;
    let jac = |v: &PolyVectorField| {
        let mut j = DMatrix::zeros(n, n);
        for k in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            j.set_column(k, &((v.eval(&xp) - v.eval(&xm)) / (2.0 * h)));
        }
        j
    };
    jac(g) * f.eval(x) - jac(f) * g.eval(x)
}

/// Random field with small integer coefficients and degree at most three.
fn random_cubic(r: &mut rand_chacha::ChaCha8Rng, n: usize) -> PolyVectorField {
    let mut terms = Vec::new();
    for c in 0..n {
        for _ in 0..3 {
            let mut powers = vec![0u32; n];
            let degree = r.gen_range(1..=3);
            for _ in 0..degree {
                powers[r.gen_range(0..n)] += 1;
            }
            terms.push(term(c, r.gen_range(-3..=3) as f64, &powers));
        }
    }
    terms.retain(|t| t.coeff != 0.0);
    field(n, &terms)
}

#[test]
fn hand_computed_brackets() {
    let f = field(2, &[term(0, -1.0, &[1, 0]), term(1, -1.0, &[0, 1])]);
    let g = field(2, &[term(0, -1.0, &[1, 0]), term(0, 1.0, &[2, 0]), term(1, -1.0, &[0, 1])]);
    // (Dg)f - (Df)g = (x₁ - 2x₁², x₂) - (x₁ - x₁², x₂) = (-x₁², 0).
    assert_eq!(poly_bracket(&f, &g).unwrap(), field(2, &[term(0, -1.0, &[2, 0])]));

    let h = field(2, &[term(0, -1.0, &[1, 0]), term(0, 1.0, &[0, 2]), term(1, -1.0, &[0, 1])]);
    // (Df)h - (Dh)f = (x₁ - x₂², x₂) - (x₁ - 2x₂², x₂) = (x₂², 0).
    let b = poly_bracket(&h, &f).unwrap();
    assert_eq!(b.to_terms(), vec![term(0, 1.0, &[0, 2])]);
    assert!(!is_commuting_fields(&[h, f]).unwrap());
}

#[test]
fn bracket_matches_finite_differences() {
    let mut r = rng(9);
    for _ in 0..20 {
        let (f, g) = (random_cubic(&mut r, 3), random_cubic(&mut r, 3));
        let b = poly_bracket(&f, &g).unwrap();
        let x = gaussian_vec(&mut r, 3) * 0.7;
        let fd = bracket_by_differences(&f, &g, &x);
        assert!((b.eval(&x) - &fd).norm() <= 1e-6 * (1.0 + fd.norm()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bracket_is_bilinear_antisymmetric_and_jacobi(seed in any::<u64>(), n in 1usize..4) {
        let mut r = rng(seed);
        let (f, g, h) = (random_cubic(&mut r, n), random_cubic(&mut r, n), random_cubic(&mut r, n));
        let fg = poly_bracket(&f, &g).unwrap();
        prop_assert!(fg.add(&poly_bracket(&g, &f).unwrap()).is_zero(0.0));
        let lhs = poly_bracket(&f.add(&h.scale(2.0)), &g).unwrap();
        let rhs = fg.add(&poly_bracket(&h, &g).unwrap().scale(2.0));
        prop_assert!(lhs.sub(&rhs).is_zero(0.0));
        let j = poly_bracket(&f, &poly_bracket(&g, &h).unwrap()).unwrap()
            .add(&poly_bracket(&g, &poly_bracket(&h, &f).unwrap()).unwrap())
            .add(&poly_bracket(&h, &poly_bracket(&f, &g).unwrap()).unwrap());
        prop_assert!(j.is_zero(0.0));
    }

    #[test]
    fn linear_fields_bracket_with_opposite_sign(seed in any::<u64>(), n in 1usize..5) {
        let mut r = rng(seed);
        let a = gaussian(&mut r, n).map(|v| v.round());
        let b = gaussian(&mut r, n).map(|v| v.round());
        let fields = poly_bracket(&PolyVectorField::linear(&a).unwrap(), &PolyVectorField::linear(&b).unwrap()).unwrap();
        let matrices = switchcert::lie_algebra::bracket(&a, &b).unwrap();
        prop_assert!(fields.sub(&PolyVectorField::linear(&(-matrices)).unwrap()).is_zero(0.0));
    }
}

#[test]
fn commuting_fields_have_commuting_jacobians() {
    let examples = [
        // Disjoint supports.
        [
            field(2, &[term(0, -1.0, &[1, 0]), term(0, -1.0, &[3, 0])]),
            field(2, &[term(1, -2.0, &[0, 1]), term(1, 1.0, &[0, 2])]),
        ],
        // Per-coordinate multiples of the same one-dimensional field.
        [
            field(2, &[term(0, -1.0, &[1, 0]), term(0, -1.0, &[3, 0]), term(1, -1.0, &[0, 1])]),
            field(2, &[term(0, -2.0, &[1, 0]), term(0, -2.0, &[3, 0]), term(1, -3.0, &[0, 1])]),
        ],
    ];
    for [f, g] in examples {
        assert!(is_commuting_fields(&[f.clone(), g.clone()]).unwrap());
        let (a, b) = (jacobian_at_origin(&f), jacobian_at_origin(&g));
        assert!((&a * &b - &b * &a).norm() == 0.0);
    }
    let mut r = rng(10);
    for _ in 0..10 {
        let case = commuting_family(&mut r, 3, 2);
        let fields: Vec<_> = case.family.modes().iter().map(|m| PolyVectorField::linear(m).unwrap()).collect();
        let b = poly_bracket(&fields[0], &fields[1]).unwrap();
        assert!(b.components().iter().all(|p| p.max_abs_coeff() < 1e-12));
        let (a0, a1) = (jacobian_at_origin(&fields[0]), jacobian_at_origin(&fields[1]));
        assert!((&a0 * &a1 - &a1 * &a0).norm() < 1e-12);
    }
}

#[test]
fn generic_decoupled_fields_need_not_commute() {
    let f = field(1, &[term(0, -1.0, &[1])]);
    let g = field(1, &[term(0, -1.0, &[1]), term(0, -1.0, &[3])]);
    let b = poly_bracket(&f, &g).unwrap();
    assert_eq!(b.to_terms(), vec![term(0, 2.0, &[3])]);
}

#[test]
fn commuting_nonlinear_pair_allows_rearrangement() {
    let f1 = field(2, &[term(0, -1.0, &[1, 0]), term(0, -1.0, &[3, 0]), term(1, -1.0, &[0, 1])]);
    let f2 = field(2, &[term(0, -2.0, &[1, 0]), term(0, -2.0, &[3, 0]), term(1, -3.0, &[0, 1])]);
    let fields = [f1, f2];
    let x0 = DVector::from_vec(vec![1.5, -0.8]);
    let switching = SwitchingSignal::from_pairs(&[(0, 0.3), (1, 0.2), (0, 0.5), (1, 0.4), (0, 0.2), (1, 0.1)]).unwrap();
    let totals = switching.activation_times(2);
    let rearranged = SwitchingSignal::from_pairs(&[(0, totals[0]), (1, totals[1])]).unwrap();
    let a = simulate_nonlinear(&fields, &switching, &x0, 1e-3).unwrap();
    let b = simulate_nonlinear(&fields, &rearranged, &x0, 1e-3).unwrap();
    assert!((a.final_state() - b.final_state()).norm() < 1e-10);
}

#[test]
fn linear_fields_agree_with_exact_propagation() {
    let mut r = rng(11);
    let family = MatrixFamily::new(vec![hurwitz(&mut r, 3), hurwitz(&mut r, 3)]).unwrap();
    let fields: Vec<_> = family.modes().iter().map(|m| PolyVectorField::linear(m).unwrap()).collect();
    let signal = SwitchingSignal::from_pairs(&[(0, 0.7), (1, 1.1), (0, 0.4)]).unwrap();
    let x0 = gaussian_vec(&mut r, 3);
    let exact = simulate_exact(&family, &signal, &x0).unwrap();
    let err = |dt: f64| (simulate_nonlinear(&fields, &signal, &x0, dt).unwrap().final_state() - exact.final_state()).norm();
    let (coarse, fine) = (err(0.02), err(0.01));
    assert!(coarse < 1e-6);
    assert!(coarse / fine >= 15.0, "ratio {}", coarse / fine);
}

#[test]
fn shim_closed_forms_for_minus_identity() {
    let f = PolyVectorField::linear(&(-DMatrix::<f64>::identity(2, 2))).unwrap();
    let x = DVector::from_vec(vec![0.8, -0.6]);
    let v = shim_lyapunov_eval(std::slice::from_ref(&f), &x, 20.0, 2001).unwrap();
    assert!((v - 0.5).abs() < 1e-6);
    let short = shim_lyapunov_detail(std::slice::from_ref(&f), &x, 1.5, 601).unwrap();
    assert!((short.value - (1.0 - (-3.0f64).exp()) / 2.0).abs() < 1e-8);
}

#[test]
fn shim_decreases_along_each_flow() {
    let mut r = rng(12);
    let case = commuting_family(&mut r, 2, 2);
    let fields: Vec<_> = case.family.modes().iter().map(|m| PolyVectorField::linear(m).unwrap()).collect();
    for _ in 0..5 {
        let x = gaussian_vec(&mut r, 2);
        let v0 = shim_lyapunov_eval(&fields, &x, 20.0, 201).unwrap();
        for f in &fields {
            let moved = flow_at_times(f, &x, &[0.05], AdaptiveTol::default()).unwrap().remove(0);
            let v1 = shim_lyapunov_eval(&fields, &moved, 20.0, 201).unwrap();
            assert!(v1 < v0, "{v1} >= {v0}");
        }
    }
}
