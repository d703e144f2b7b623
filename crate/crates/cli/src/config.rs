use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;

/// Values read from a `--config` TOML file. Every key is optional.
#[derive(Debug, Default, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub horizon: Option<f64>,
    pub max_iters: Option<usize>,
    pub dt: Option<f64>,
    pub quad_points: Option<usize>,
    pub rotations: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Effective settings after applying flags over the config file over defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub seed: u64,
    pub trials: usize,
    /// `None` lets each command pick a scale-aware default.
    pub horizon: Option<f64>,
    pub max_iters: usize,
    pub dt: f64,
    pub quad_points: usize,
    pub rotations: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 200,
            horizon: None,
            max_iters: 5000,
            dt: 1e-3,
            quad_points: 301,
            rotations: 3,
        }
    }
}

impl Settings {
    pub fn resolve(flags: &FileConfig, file: &FileConfig) -> Self {
        let d = Self::default();
        Self {
            seed: flags.seed.or(file.seed).unwrap_or(d.seed),
            trials: flags.trials.or(file.trials).unwrap_or(d.trials),
            horizon: flags.horizon.or(file.horizon).or(d.horizon),
            max_iters: flags.max_iters.or(file.max_iters).unwrap_or(d.max_iters),
            dt: flags.dt.or(file.dt).unwrap_or(d.dt),
            quad_points: flags.quad_points.or(file.quad_points).unwrap_or(d.quad_points),
            rotations: flags.rotations.or(file.rotations).unwrap_or(d.rotations),
        }
    }
}
