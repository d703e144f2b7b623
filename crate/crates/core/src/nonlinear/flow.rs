use nalgebra::DVector;

use super::poly::PolyVectorField;
use crate::error::{Error, Result};

/// Norm beyond which a trajectory counts as escaped.
pub const ESCAPE_THRESHOLD: f64 = 1e6;

pub fn rk4_step(f: &PolyVectorField, x: &DVector<f64>, h: f64) -> DVector<f64> {
    let k1 = f.eval(x);
    let k2 = f.eval(&(x + &k1 * (h / 2.0)));
    let k3 = f.eval(&(x + &k2 * (h / 2.0)));
    let k4 = f.eval(&(x + &k3 * h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Fixed-step RK4 over `[0, t]` with steps of at most `h`.
pub fn rk4_flow(f: &PolyVectorField, x: &DVector<f64>, t: f64, h: f64) -> DVector<f64> {
    if t <= 0.0 {
        return x.clone();
    }
    let steps = (t / h).ceil().max(1.0) as usize;
    let dt = t / steps as f64;
    let mut y = x.clone();
    for _ in 0..steps {
        y = rk4_step(f, &y, dt);
        if !y.iter().all(|v| v.is_finite()) {
            break;
        }
    }
    y
}

// Dormand–Prince 5(4) tableau; the nodes are implied since fields are autonomous.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Tolerances of the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveTol {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for AdaptiveTol {
    fn default() -> Self {
        Self {
            rtol: 1e-11,
            atol: 1e-13,
        }
    }
}

struct Dopri<'a> {
    f: &'a PolyVectorField,
    k: [Vec<f64>; 7],
    stage: Vec<f64>,
    y5: Vec<f64>,
    err: Vec<f64>,
}

impl<'a> Dopri<'a> {
    fn new(f: &'a PolyVectorField) -> Self {
        let n = f.n();
        Self {
            f,
            k: std::array::from_fn(|_| vec![0.0; n]),
            stage: vec![0.0; n],
            y5: vec![0.0; n],
            err: vec![0.0; n],
        }
    }

    /// One step of size `h` from `x`; leaves the result in `y5` and the
    /// embedded error estimate in `err`.
    fn step(&mut self, x: &[f64], h: f64) {
        for (s, row) in A.iter().enumerate() {
            self.stage.copy_from_slice(x);
            for (j, &a) in row.iter().enumerate().take(s) {
                if a != 0.0 {
                    for (y, kj) in self.stage.iter_mut().zip(&self.k[j]) {
                        *y += h * a * kj;
                    }
                }
            }
            self.f.eval_into(&self.stage, &mut self.k[s]);
        }
        self.y5.copy_from_slice(x);
        self.err.fill(0.0);
        for (s, k) in self.k.iter().enumerate() {
            let (b, e) = (h * B5[s], h * (B5[s] - B4[s]));
            for ((y, err), kv) in self.y5.iter_mut().zip(self.err.iter_mut()).zip(k) {
                *y += b * kv;
                *err += e * kv;
            }
        }
    }
}

/// Adaptive Dormand–Prince flow of `f` from `x`, returning the state at each
/// of the (nondecreasing, nonnegative) `times`.
pub fn flow_at_times(
    f: &PolyVectorField,
    x: &DVector<f64>,
    times: &[f64],
    tol: AdaptiveTol,
) -> Result<Vec<DVector<f64>>> {
    let mut out = Vec::with_capacity(times.len());
    let mut integrator = Dopri::new(f);
    let mut t = 0.0;
    let mut y: Vec<f64> = x.iter().copied().collect();
    let mut h = times
        .iter()
        .copied()
        .find(|&s| s > 0.0)
        .map_or(1e-2, |s| (s / 4.0).min(1e-2));
    for &target in times {
        while t < target {
            let step = h.min(target - t);
            integrator.step(&y, step);
            let scale = integrator
                .err
                .iter()
                .zip(y.iter().zip(&integrator.y5))
                .map(|(e, (a, b))| {
                    let sc = tol.atol + tol.rtol * a.abs().max(b.abs());
                    (e / sc).powi(2)
                })
                .sum::<f64>()
                / y.len() as f64;
            let ratio = scale.sqrt();
            if !ratio.is_finite() {
                h = step / 10.0;
                if h < 1e-14 {
                    return Err(Error::FlowDivergence { time: t });
                }
                continue;
            }
            if ratio <= 1.0 {
                t += step;
                y.copy_from_slice(&integrator.y5);
                if y.iter().map(|v| v * v).sum::<f64>().sqrt() > ESCAPE_THRESHOLD {
                    return Err(Error::FlowDivergence { time: t });
                }
                // A step clipped to hit `target` must not shrink h.
                let grow = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
                h = h.max(step) * grow;
            } else {
                h = step * (0.9 * ratio.powf(-0.2)).clamp(0.1, 1.0);
                if h < 1e-14 {
                    return Err(Error::FlowDivergence { time: t });
                }
            }
        }
        out.push(DVector::from_column_slice(&y));
    }
    Ok(out)
}
