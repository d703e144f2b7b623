use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shortest admissible segment duration.
pub const MIN_DWELL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Zero-based mode index.
    pub mode: usize,
    pub duration: f64,
}

/// Piecewise-constant switching signal: an ordered list of (mode, duration).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchingSignal {
    segments: Vec<Segment>,
}

impl SwitchingSignal {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        for (k, s) in segments.iter().enumerate() {
            if !s.duration.is_finite() || s.duration < MIN_DWELL {
                return Err(Error::InvalidSignal(format!(
                    "segment {k} has duration {:e}; durations must be finite and at least {MIN_DWELL:e}",
                    s.duration
                )));
            }
        }
        Ok(Self { segments })
    }

    pub fn from_pairs(pairs: &[(usize, f64)]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|&(mode, duration)| Segment { mode, duration })
                .collect(),
        )
    }

    /// Constant signal `σ ≡ mode` on `[0, duration]`.
    pub fn constant(mode: usize, duration: f64) -> Result<Self> {
        Self::from_pairs(&[(mode, duration)])
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_time(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Total activation time of each of `m` modes.
    pub fn activation_times(&self, m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        for s in &self.segments {
            if s.mode < m {
                out[s.mode] += s.duration;
            }
        }
        out
    }

    pub(crate) fn check_modes(&self, m: usize) -> Result<()> {
        match self.segments.iter().find(|s| s.mode >= m) {
            Some(s) => Err(Error::InvalidSignal(format!(
                "mode index {} out of range for {m} modes",
                s.mode
            ))),
            None => Ok(()),
        }
    }

    /// Merges adjacent segments with the same mode.
    pub fn merged(&self) -> Self {
        let mut out: Vec<Segment> = Vec::new();
        for s in &self.segments {
            match out.last_mut() {
                Some(last) if last.mode == s.mode => last.duration += s.duration,
                _ => out.push(*s),
            }
        }
        Self { segments: out }
    }
}

/// Random signal on `[0, horizon]`: i.i.d. uniform dwell times in
/// `dwell_range` and uniform mode draws. The final segment is clipped to
/// end exactly at the horizon.
pub fn random_signal(
    m: usize,
    horizon: f64,
    dwell_range: (f64, f64),
    seed: u64,
) -> Result<SwitchingSignal> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_signal_with(&mut rng, m, horizon, dwell_range)
}

pub(crate) fn random_signal_with<R: Rng>(
    rng: &mut R,
    m: usize,
    horizon: f64,
    (lo, hi): (f64, f64),
) -> Result<SwitchingSignal> {
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one mode".into()));
    }
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "dwell range ({lo}, {hi}) must satisfy 0 < min <= max"
        )));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon {horizon} must be positive")));
    }
    let mut segments = Vec::new();
    let mut t = 0.0;
    while horizon - t >= MIN_DWELL {
        let dwell = if lo == hi { lo } else { rng.gen_range(lo..=hi) };
        let mode = if m == 1 { 0 } else { rng.gen_range(0..m) };
        let duration = dwell.min(horizon - t);
        segments.push(Segment { mode, duration });
        t += duration;
    }
    SwitchingSignal::new(segments)
}
