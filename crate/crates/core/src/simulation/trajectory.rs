use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::signal::SwitchingSignal;
use crate::error::{Error, Result};

/// Bracket `[lo, hi]` containing the time at which the state norm first
/// exceeded the escape threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EscapeInterval {
    pub lo: f64,
    pub hi: f64,
}

/// Sampled state path generated by a switching signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub norms: Vec<f64>,
    /// Active (zero-based) mode at each sample.
    pub modes: Vec<usize>,
    pub signal: SwitchingSignal,
    pub escape: Option<EscapeInterval>,
}

impl Trajectory {
    pub(crate) fn start(signal: SwitchingSignal, x0: &DVector<f64>, mode: usize) -> Self {
        Self {
            times: vec![0.0],
            states: vec![x0.clone()],
            norms: vec![x0.norm()],
            modes: vec![mode],
            signal,
            escape: None,
        }
    }

    pub(crate) fn push(&mut self, t: f64, x: DVector<f64>, mode: usize) {
        self.times.push(t);
        self.norms.push(x.norm());
        self.states.push(x);
        self.modes.push(mode);
    }

    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory has at least one sample")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has at least one sample")
    }

    pub fn max_norm(&self) -> f64 {
        self.norms.iter().copied().fold(0.0, f64::max)
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, |x| x.len())
    }

    /// CSV with columns `t, x_1..x_n, norm, active_mode` (mode 1-based).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.dim();
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x_{i}")));
        header.push("norm".into());
        header.push("active_mode".into());
        w.write_record(&header).map_err(csv_err)?;
        for k in 0..self.times.len() {
            let mut row = vec![self.times[k].to_string()];
            row.extend(self.states[k].iter().map(|v| v.to_string()));
            row.push(self.norms[k].to_string());
            row.push((self.modes[k] + 1).to_string());
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)
            .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
        self.write_csv(file)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidArgument(format!("csv: {e}"))
}
