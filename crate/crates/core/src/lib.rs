//! Certification toolkit for stability of switched systems under arbitrary
//! switching, driven by commutation relations among the modes.

pub mod error;
pub mod expm;
pub mod family;
pub mod lie_algebra;
pub mod linalg;
pub mod lyapunov;
pub mod nonlinear;
pub mod problem;
pub mod report;
pub mod serde_rows;
pub mod simulation;
pub mod triangularization;

pub use error::{Error, Result};
pub use nalgebra;
pub use family::MatrixFamily;
pub use problem::Problem;
pub use report::{analyze, report_to_json, AnalyzeOptions, StabilityReport, Verdict};
