use thiserror::Error;

/// Errors raised across the certification toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}x{expected}, got {rows}x{cols}")]
    DimensionMismatch {
        expected: usize,
        rows: usize,
        cols: usize,
    },

    #[error("invalid matrix family: {0}")]
    InvalidFamily(String),

    #[error("mode {mode} is not Hurwitz (largest eigenvalue real part {max_real:.3e})")]
    NotHurwitz { mode: usize, max_real: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("certificate invalid: margins {margins:?} are not all negative")]
    CertificateInvalid { margins: Vec<f64> },

    #[error("mode {mode} is not upper triangular (below-diagonal magnitude {magnitude:.3e})")]
    NotTriangular { mode: usize, magnitude: f64 },

    #[error("the generated Lie algebra is not solvable")]
    NotSolvable,

    #[error("no common eigenvector found (best residual {residual:.3e})")]
    NoCommonEigenvector { residual: f64 },

    #[error("deflation failed at depth {depth}: best residual {residual:.3e}")]
    DeflationFailure { depth: usize, residual: f64 },

    #[error("collinearity set is not a pair of distinct lines (quadratic form is definite or degenerate)")]
    NoCollinearityLines,

    #[error("worst-case planar analysis needs exactly two 2x2 modes")]
    NotPlanar,

    #[error("mode {mode} does not rotate consistently about the origin")]
    NonRotating { mode: usize },

    #[error("Lie brackets of trigonometric terms are not supported")]
    TrigUnsupported,

    #[error("flow diverged (norm above threshold) at t = {time:.4}")]
    FlowDivergence { time: f64 },

    #[error("invalid switching signal: {0}")]
    InvalidSignal(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
