//! Switched linear systems under prescribed, random and worst-case
//! switching.

mod gues;
mod signal;
mod trajectory;
mod worst_case;

pub use gues::{estimate_gues, fit_envelope, time_scale, EnvelopeFit, GuesEstimate, ENVELOPE_OVERSHOOT, GROWTH_THRESHOLD};
pub use signal::{random_signal, Segment, SwitchingSignal, MIN_DWELL};
pub use trajectory::{EscapeInterval, Trajectory};
pub use worst_case::{collinearity_rays, worst_case_planar, WorstCase};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expm::{expm, expm_scaled};
use crate::family::MatrixFamily;
use crate::lie_algebra::bracket;

/// Interior samples per segment used by [`simulate_exact`].
pub const DEFAULT_SAMPLES_PER_SEGMENT: usize = 8;

fn check_state(family: &MatrixFamily, x0: &DVector<f64>) -> Result<()> {
    if x0.len() != family.n() {
        return Err(Error::DimensionMismatch {
            expected: family.n(),
            rows: x0.len(),
            cols: 1,
        });
    }
    Ok(())
}

/// Exact piecewise propagation `x ← e^{A_p τ} x`, sampled at every segment
/// boundary plus uniform interior points.
pub fn simulate_exact(
    family: &MatrixFamily,
    signal: &SwitchingSignal,
    x0: &DVector<f64>,
) -> Result<Trajectory> {
    simulate_exact_with(family, signal, x0, DEFAULT_SAMPLES_PER_SEGMENT, None)
}

/// [`simulate_exact`] with a configurable sampling density; stops after the
/// first sample whose norm exceeds `stop_norm`.
pub fn simulate_exact_with(
    family: &MatrixFamily,
    signal: &SwitchingSignal,
    x0: &DVector<f64>,
    samples_per_segment: usize,
    stop_norm: Option<f64>,
) -> Result<Trajectory> {
    check_state(family, x0)?;
    signal.check_modes(family.len())?;
    let first_mode = signal.segments().first().map_or(0, |s| s.mode);
    let mut traj = Trajectory::start(signal.clone(), x0, first_mode);
    let mut x = x0.clone();
    let mut t = 0.0;
    let sub = samples_per_segment.max(1);
    for seg in signal.segments() {
        let a = family.mode(seg.mode);
        let h = seg.duration / sub as f64;
        let step = expm_scaled(a, h);
        let start = x.clone();
        for k in 1..sub {
            x = &step * &x;
            traj.push(t + h * k as f64, x.clone(), seg.mode);
            if stop_norm.is_some_and(|lim| traj.norms.last().copied().unwrap_or(0.0) > lim) {
                return Ok(traj);
            }
        }
        // Segment endpoint straight from the full-segment exponential.
        x = expm_scaled(a, seg.duration) * start;
        t += seg.duration;
        traj.push(t, x.clone(), seg.mode);
        if stop_norm.is_some_and(|lim| x.norm() > lim) {
            return Ok(traj);
        }
    }
    Ok(traj)
}

/// Endpoint of the same signal with every mode's activation time gathered
/// into one segment, modes applied in index order:
/// `e^{A_m T_m} ... e^{A_1 T_1} x0`. Equals the true endpoint when the modes
/// commute.
pub fn rearranged_endpoint(
    family: &MatrixFamily,
    signal: &SwitchingSignal,
    x0: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_state(family, x0)?;
    signal.check_modes(family.len())?;
    let mut x = x0.clone();
    for (p, total) in signal.activation_times(family.len()).into_iter().enumerate() {
        if total > 0.0 {
            x = expm_scaled(family.mode(p), total) * x;
        }
    }
    Ok(x)
}

/// Fixed-step classical Runge–Kutta endpoint; cross-validation path.
pub fn rk4_endpoint(
    family: &MatrixFamily,
    signal: &SwitchingSignal,
    x0: &DVector<f64>,
    dt: f64,
) -> Result<DVector<f64>> {
    check_state(family, x0)?;
    signal.check_modes(family.len())?;
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::InvalidArgument("dt must be positive".into()));
    }
    let mut x = x0.clone();
    for seg in signal.segments() {
        let a = family.mode(seg.mode);
        let steps = (seg.duration / dt).ceil().max(1.0) as usize;
        let h = seg.duration / steps as f64;
        for _ in 0..steps {
            let k1 = a * &x;
            let k2 = a * (&x + &k1 * (h / 2.0));
            let k3 = a * (&x + &k2 * (h / 2.0));
            let k4 = a * (&x + &k3 * h);
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
    }
    Ok(x)
}

/// `‖e^{tA_1} e^{sA_2} - e^{tA_1 + sA_2 + (ts/2)[A_1, A_2]}‖_F`; zero when
/// the pair satisfies the second-order nilpotency relations.
pub fn bch2_check(a1: &DMatrix<f64>, a2: &DMatrix<f64>, t: f64, s: f64) -> Result<f64> {
    let br = bracket(a1, a2)?;
    let lhs = expm_scaled(a1, t) * expm_scaled(a2, s);
    let rhs = expm(&(a1 * t + a2 * s + br * (t * s / 2.0)));
    Ok((lhs - rhs).norm())
}
