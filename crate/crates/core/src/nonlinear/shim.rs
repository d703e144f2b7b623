use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::flow::{flow_at_times, AdaptiveTol};
use super::poly::PolyVectorField;
use crate::error::{Error, Result};

/// Maximum number of fields accepted by the nested evaluator.
pub const SHIM_MAX_FIELDS: usize = 3;

/// Truncated nested integral together with an estimate of the neglected
/// `∫_T^∞` part of the outermost integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShimValue {
    pub value: f64,
    pub tail_estimate: f64,
}

/// `V_m(x)` for the nested construction
/// `V_1(x) = ∫_0^T |φ_1(t,x)|² dt`, `V_i(x) = ∫_0^T V_{i-1}(φ_i(t,x)) dt`.
pub fn shim_lyapunov_eval(
    fields: &[PolyVectorField],
    x: &DVector<f64>,
    horizon: f64,
    quad_points: usize,
) -> Result<f64> {
    Ok(shim_lyapunov_detail(fields, x, horizon, quad_points)?.value)
}

/// Like [`shim_lyapunov_eval`] but also reports the tail estimate.
///
/// Composite Simpson quadrature is used; an even `quad_points` is raised to
/// the next odd number.
pub fn shim_lyapunov_detail(
    fields: &[PolyVectorField],
    x: &DVector<f64>,
    horizon: f64,
    quad_points: usize,
) -> Result<ShimValue> {
    if fields.is_empty() || fields.len() > SHIM_MAX_FIELDS {
        return Err(Error::InvalidArgument(format!(
            "nested evaluation supports 1 to {SHIM_MAX_FIELDS} fields, got {}",
            fields.len()
        )));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument("horizon must be positive and finite".into()));
    }
    if quad_points < 3 {
        return Err(Error::InvalidArgument("at least 3 quadrature points required".into()));
    }
    let n = fields[0].n();
    if fields.iter().any(|f| f.n() != n) || x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            rows: x.len(),
            cols: 1,
        });
    }
    let nodes = quad_points | 1;
    let h = horizon / (nodes - 1) as f64;
    let times: Vec<f64> = (0..nodes).map(|k| k as f64 * h).collect();
    let q = Quadrature { times, h };
    level(fields, fields.len(), x, &q, true)
}

struct Quadrature {
    times: Vec<f64>,
    h: f64,
}

impl Quadrature {
    fn simpson(&self, g: &[f64]) -> f64 {
        let last = g.len() - 1;
        let inner: f64 = g[1..last]
            .iter()
            .enumerate()
            .map(|(k, v)| if k % 2 == 0 { 4.0 * v } else { 2.0 * v })
            .sum();
        self.h / 3.0 * (g[0] + inner + g[last])
    }

    /// `∫_T^∞ g` assuming exponential decay at the rate seen over the last step.
    fn tail(&self, g: &[f64]) -> f64 {
        let k = g.len() - 1;
        let (a, b) = (g[k - 1], g[k]);
        if b <= 0.0 {
            return 0.0;
        }
        let rate = (a / b).ln() / self.h;
        if rate > 0.0 && rate.is_finite() {
            b / rate
        } else {
            f64::INFINITY
        }
    }
}

fn level(
    fields: &[PolyVectorField],
    i: usize,
    x: &DVector<f64>,
    q: &Quadrature,
    parallel: bool,
) -> Result<ShimValue> {
    let path = flow_at_times(&fields[i - 1], x, &q.times, AdaptiveTol::default())?;
    let g: Vec<f64> = if i == 1 {
        path.iter().map(|y| y.norm_squared()).collect()
    } else if parallel {
        path.par_iter()
            .map(|y| level(fields, i - 1, y, q, false).map(|v| v.value))
            .collect::<Result<_>>()?
    } else {
        path.iter()
            .map(|y| level(fields, i - 1, y, q, false).map(|v| v.value))
            .collect::<Result<_>>()?
    };
    Ok(ShimValue {
        value: q.simpson(&g),
        tail_estimate: q.tail(&g),
    })
}
