//! Polynomial vector fields: brackets, linearization, switched simulation
//! and the nested Lyapunov construction for commuting nonlinear modes.

mod flow;
mod poly;
mod shim;

pub use flow::{flow_at_times, rk4_flow, rk4_step, AdaptiveTol, ESCAPE_THRESHOLD};
pub use poly::{
    is_commuting_fields, jacobian_at_origin, poly_bracket, Monomial, PolyVectorField, Polynomial,
    TermSpec, TrigFactor, TrigKind, COMMUTING_COEFF_TOL,
};
pub use shim::{shim_lyapunov_detail, shim_lyapunov_eval, ShimValue, SHIM_MAX_FIELDS};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::simulation::{EscapeInterval, SwitchingSignal, Trajectory};

/// Width to which the escape time is bracketed.
pub const ESCAPE_TIME_RESOLUTION: f64 = 1e-3;

fn escaped(x: &DVector<f64>) -> bool {
    !x.iter().all(|v| v.is_finite()) || x.norm() > ESCAPE_THRESHOLD
}

/// Fixed-step RK4 simulation of `ẋ = f_σ(x)`, one sample per step.
///
/// Leaving the ball of radius [`ESCAPE_THRESHOLD`] stops the run and sets
/// [`Trajectory::escape`]; it is not an error.
pub fn simulate_nonlinear(
    fields: &[PolyVectorField],
    signal: &SwitchingSignal,
    x0: &DVector<f64>,
    dt: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument("dt must be positive".into()));
    }
    let Some(first) = fields.first() else {
        return Err(Error::InvalidArgument("no vector fields given".into()));
    };
    let n = first.n();
    if fields.iter().any(|f| f.n() != n) || x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            rows: x0.len(),
            cols: 1,
        });
    }
    signal.check_modes(fields.len())?;

    let segments = signal.segments();
    let mut traj = Trajectory::start(signal.clone(), x0, segments[0].mode);
    let mut t = 0.0;
    let mut x = x0.clone();
    for seg in segments {
        let f = &fields[seg.mode];
        let steps = (seg.duration / dt).ceil().max(1.0) as usize;
        let h = seg.duration / steps as f64;
        for _ in 0..steps {
            let next = rk4_step(f, &x, h);
            if escaped(&next) {
                let (lo, hi, state) = bracket_escape(f, &x, h);
                traj.escape = Some(EscapeInterval { lo: t + lo, hi: t + hi });
                traj.push(t + hi, state, seg.mode);
                return Ok(traj);
            }
            t += h;
            x = next;
            traj.push(t, x.clone(), seg.mode);
        }
    }
    Ok(traj)
}

/// Bisects the first threshold crossing inside a step of length `h` from `x`.
fn bracket_escape(f: &PolyVectorField, x: &DVector<f64>, h: f64) -> (f64, f64, DVector<f64>) {
    let sub = h / 64.0;
    let (mut lo, mut hi) = (0.0, h);
    let mut state = rk4_flow(f, x, h, sub);
    while hi - lo >= ESCAPE_TIME_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        let y = rk4_flow(f, x, mid, sub);
        if escaped(&y) {
            hi = mid;
            state = y;
        } else {
            lo = mid;
        }
    }
    (lo, hi, state)
}

/// The unstable planar system `ẋ₁ = -x₁ + x₁²x₂`, `ẋ₂ = -x₂`.
pub fn finite_escape_field() -> PolyVectorField {
    PolyVectorField::from_terms(
        2,
        &[
            term(0, -1.0, [1, 0], None),
            term(0, 1.0, [2, 1], None),
            term(1, -1.0, [0, 1], None),
        ],
    )
    .expect("valid field")
}

/// The globally asymptotically stable pair
/// `f_1 = (-x₁ + 2 sin²(x₁) x₁²x₂, -x₂)` and
/// `f_2 = (-x₁ + 2 cos²(x₁) x₁²x₂, -x₂)`, whose average is
/// [`finite_escape_field`].
pub fn angeli_fields() -> [PolyVectorField; 2] {
    let make = |tag: &str| {
        PolyVectorField::from_terms(
            2,
            &[
                term(0, -1.0, [1, 0], None),
                term(0, 2.0, [2, 1], Some(tag)),
                term(1, -1.0, [0, 1], None),
            ],
        )
        .expect("valid field")
    };
    [make("sin2:0"), make("cos2:0")]
}

fn term(component: usize, coeff: f64, powers: [u32; 2], trig: Option<&str>) -> TermSpec {
    TermSpec {
        component,
        coeff,
        powers: powers.to_vec(),
        trig: trig.map(str::to_string),
    }
}
