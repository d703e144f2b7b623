use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::signal::random_signal_with;
use super::{simulate_exact_with, Trajectory};
use crate::error::Result;
use crate::family::MatrixFamily;
use crate::linalg::eigenvalues;

/// Norm above which a trajectory counts as a growth witness.
pub const GROWTH_THRESHOLD: f64 = 1e6;
const ENVELOPE_BINS: usize = 100;

/// Outcome of the random-switching experiment.
#[derive(Debug, Clone)]
pub enum GuesEstimate {
    /// `|x(t)| <= c e^{-λ t} |x(0)|` over every sample seen.
    Envelope {
        c: f64,
        lambda: f64,
        trials: usize,
        max_norm: f64,
    },
    GrowthWitness {
        trial: usize,
        trajectory: Trajectory,
    },
}

/// Envelope data suitable for reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub c: f64,
    pub lambda: f64,
}

/// Allowed ratio between the envelope constant and the peak observed norm.
pub const ENVELOPE_OVERSHOOT: f64 = 1.1;

/// Fits `log|x| ≈ log c - λ t` by least squares on per-bin maxima, lowers
/// `λ` if needed so that the covering constant stays within
/// [`ENVELOPE_OVERSHOOT`] of the peak sample, then raises `c` until the
/// envelope covers every sample.
pub fn fit_envelope(samples: &[(f64, f64)], horizon: f64) -> EnvelopeFit {
    let mut bins = vec![f64::NEG_INFINITY; ENVELOPE_BINS];
    for &(t, log_norm) in samples {
        let idx = ((t / horizon) * ENVELOPE_BINS as f64).floor() as usize;
        let idx = idx.min(ENVELOPE_BINS - 1);
        bins[idx] = bins[idx].max(log_norm);
    }
    let width = horizon / ENVELOPE_BINS as f64;
    let pts: Vec<(f64, f64)> = bins
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .map(|(i, v)| ((i as f64 + 0.5) * width, *v))
        .collect();
    let lambda = if pts.len() < 2 {
        0.0
    } else {
        let k = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
        -sxy / sxx
    };
    let peak = samples.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let cap = samples
        .iter()
        .filter(|s| s.0 > 0.0)
        .map(|&(t, y)| (peak + ENVELOPE_OVERSHOOT.ln() - y) / t)
        .fold(f64::INFINITY, f64::min);
    let lambda = lambda.min(cap);
    let log_c = samples
        .iter()
        .map(|&(t, y)| y + lambda * t)
        .fold(f64::NEG_INFINITY, f64::max);
    EnvelopeFit {
        c: log_c.exp(),
        lambda,
    }
}

/// Characteristic time `1/ρ` with `ρ` the largest eigenvalue modulus over all modes.
pub fn time_scale(family: &MatrixFamily) -> f64 {
    let rho = family
        .modes()
        .iter()
        .flat_map(|a| eigenvalues(a).into_iter().map(|z| z.norm()))
        .fold(0.0, f64::max);
    if rho > 0.0 {
        1.0 / rho
    } else {
        1.0
    }
}

/// Random-switching falsification and empirical decay envelope.
///
/// Each trial draws a signal with dwell times in `[0.25τ, 2.5τ]`
/// (`τ = 1/max spectral radius`) and a uniform unit initial state. The
/// lowest-index trial whose norm exceeds [`GROWTH_THRESHOLD`] is returned as
/// a witness; otherwise the envelope is fitted over all samples.
pub fn estimate_gues(
    family: &MatrixFamily,
    trials: usize,
    horizon: f64,
    seed: u64,
) -> Result<GuesEstimate> {
    family.ensure_hurwitz()?;
    let tau = time_scale(family);
    let dwell = (0.25 * tau, 2.5 * tau);
    let n = family.n();

    let runs: Vec<Result<Trajectory>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64);
            let signal = random_signal_with(&mut rng, family.len(), horizon, dwell)?;
            let mut x0 = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            let norm = x0.norm();
            if norm > 0.0 {
                x0 /= norm;
            } else {
                x0[0] = 1.0;
            }
            simulate_exact_with(family, &signal, &x0, 4, Some(GROWTH_THRESHOLD))
        })
        .collect();

    let mut samples = Vec::new();
    let mut max_norm = 0.0f64;
    for (trial, run) in runs.into_iter().enumerate() {
        let traj = run?;
        if traj.max_norm() > GROWTH_THRESHOLD {
            return Ok(GuesEstimate::GrowthWitness {
                trial,
                trajectory: traj,
            });
        }
        max_norm = max_norm.max(traj.max_norm());
        samples.extend(
            traj.times
                .iter()
                .zip(&traj.norms)
                .filter(|(_, nm)| **nm > 0.0)
                .map(|(t, nm)| (*t, nm.ln())),
        );
    }
    let fit = fit_envelope(&samples, horizon);
    Ok(GuesEstimate::Envelope {
        c: fit.c,
        lambda: fit.lambda,
        trials,
        max_norm,
    })
}
