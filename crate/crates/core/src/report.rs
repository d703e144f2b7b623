//! Decision pipeline: classify the algebra, try the matching certificate
//! construction, and fall back to search and random-switching falsification.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::family::MatrixFamily;
use crate::lie_algebra::{classify, AlgebraClassification};
use crate::linalg::{ensure_hurwitz, lambda_min, spectral_abscissa};
use crate::lyapunov::{check_common_lyapunov, find_qclf, nb_chain, QclfSearch, QuadraticCertificate};
use crate::simulation::{estimate_gues, time_scale, GuesEstimate, Trajectory};
use crate::triangularization::solvable_certificate;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub n: usize,
    pub modes: usize,
    /// SHA-256 over the dimensions and the big-endian bit patterns of all
    /// matrix entries in row-major order.
    pub sha256: String,
}

impl InputDigest {
    pub fn of(family: &MatrixFamily) -> Self {
        let mut h = Sha256::new();
        h.update((family.n() as u64).to_be_bytes());
        h.update((family.len() as u64).to_be_bytes());
        for a in family.modes() {
            for i in 0..a.nrows() {
                for j in 0..a.ncols() {
                    // Canonicalize -0.0 so equal inputs hash equally.
                    let v = if a[(i, j)] == 0.0 { 0.0 } else { a[(i, j)] };
                    h.update(v.to_bits().to_be_bytes());
                }
            }
        }
        Self {
            n: family.n(),
            modes: family.len(),
            sha256: hex::encode(h.finalize()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    NbChain,
    TriangularDiagonal,
    LmiSearch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "GUES_certified")]
    GuesCertified,
    #[serde(rename = "undecided")]
    Undecided,
    #[serde(rename = "growth_witness")]
    GrowthWitness,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::GuesCertified => 0,
            Self::Undecided => 2,
            Self::GrowthWitness => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateRecord {
    pub provenance: Provenance,
    #[serde(flatten)]
    pub certificate: QuadraticCertificate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimulationSummary {
    Envelope {
        c: f64,
        lambda: f64,
        trials: usize,
        horizon: f64,
        max_norm: f64,
    },
    Witness {
        trial: usize,
        final_time: f64,
        max_norm: f64,
        /// CSV file holding the diverging trajectory.
        trajectory_csv: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageError {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub input: InputDigest,
    pub seed: u64,
    pub classification: Option<AlgebraClassification>,
    pub certificate: Option<CertificateRecord>,
    pub verdict: Verdict,
    pub simulation: Option<SimulationSummary>,
    pub robustness_radius: Option<f64>,
    pub errors: Vec<StageError>,
    pub timings: Vec<StageTiming>,
}

impl StabilityReport {
    pub fn exit_code(&self) -> i32 {
        self.verdict.exit_code()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeOptions {
    pub seed: u64,
    pub trials: usize,
    /// Simulation horizon; `None` means 100 time scales of the family.
    pub horizon: Option<f64>,
    /// Iteration budget of the quadratic search.
    pub max_iters: usize,
    /// Skip random-switching falsification when no certificate is found.
    pub falsify: bool,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 200,
            horizon: None,
            max_iters: QclfSearch::default().max_iters,
            falsify: true,
        }
    }
}

/// Budget multiplier for the case where a certificate is known to exist.
pub const COMPACT_BUDGET_FACTOR: usize = 10;

pub struct Analysis {
    pub report: StabilityReport,
    pub witness: Option<Trajectory>,
}

struct Stages {
    errors: Vec<StageError>,
    timings: Vec<StageTiming>,
}

impl Stages {
    fn run<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Option<T> {
        let start = Instant::now();
        let out = f();
        self.timings.push(StageTiming {
            stage: stage.into(),
            seconds: start.elapsed().as_secs_f64(),
        });
        match out {
            Ok(v) => Some(v),
            Err(e) => {
                self.fail(stage, e.to_string());
                None
            }
        }
    }

    fn fail(&mut self, stage: &str, message: String) {
        self.errors.push(StageError {
            stage: stage.into(),
            message,
        });
    }

    /// Reruns the margin check from scratch before a certificate is accepted.
    fn revalidate(
        &mut self,
        stage: &str,
        family: &MatrixFamily,
        cert: QuadraticCertificate,
        provenance: Provenance,
    ) -> Option<CertificateRecord> {
        let margins = check_common_lyapunov(&cert.p, family);
        if lambda_min(&cert.p) > 0.0 && margins.iter().all(|m| *m < 0.0) {
            Some(CertificateRecord {
                provenance,
                certificate: cert,
            })
        } else {
            self.fail(stage, Error::CertificateInvalid { margins }.to_string());
            None
        }
    }
}

/// Runs the full pipeline on a linear family. Stage failures are recorded in
/// the report rather than returned.
pub fn analyze(family: &MatrixFamily, opts: &AnalyzeOptions) -> Analysis {
    let mut st = Stages {
        errors: Vec::new(),
        timings: Vec::new(),
    };
    let input = InputDigest::of(family);

    let mut hurwitz = true;
    for (p, a) in family.modes().iter().enumerate() {
        if ensure_hurwitz(a).is_err() {
            hurwitz = false;
            st.fail(
                "hurwitz",
                Error::NotHurwitz {
                    mode: p,
                    max_real: spectral_abscissa(a),
                }
                .to_string(),
            );
        }
    }

    let classification = st.run("classify", || Ok(classify(family)));
    let mut certificate = None;
    let mut simulation = None;
    let mut witness = None;

    if hurwitz {
        let cls = classification.as_ref().expect("classification is infallible");
        if cls.commuting {
            certificate = st
                .run("nb_chain", || nb_chain(family))
                .and_then(|c| st.revalidate("nb_chain", family, c, Provenance::NbChain));
        }
        if certificate.is_none() && cls.solvable {
            certificate = st
                .run("triangular_diagonal", || solvable_certificate(family).map(|(_, c)| c))
                .and_then(|c| st.revalidate("triangular_diagonal", family, c, Provenance::TriangularDiagonal));
        }
        if certificate.is_none() {
            let factor = if cls.solvable_plus_compact { COMPACT_BUDGET_FACTOR } else { 1 };
            let search = QclfSearch {
                max_iters: opts.max_iters * factor,
                seed: opts.seed,
                ..QclfSearch::default()
            };
            certificate = st
                .run("lmi_search", || find_qclf(family, &search))
                .flatten()
                .and_then(|c| st.revalidate("lmi_search", family, c, Provenance::LmiSearch));
        }
        if certificate.is_none() && opts.falsify {
            let horizon = opts.horizon.unwrap_or_else(|| 100.0 * time_scale(family));
            match st.run("simulate", || estimate_gues(family, opts.trials, horizon, opts.seed)) {
                Some(GuesEstimate::Envelope {
                    c,
                    lambda,
                    trials,
                    max_norm,
                }) => {
                    simulation = Some(SimulationSummary::Envelope {
                        c,
                        lambda,
                        trials,
                        horizon,
                        max_norm,
                    })
                }
                Some(GuesEstimate::GrowthWitness { trial, trajectory }) => {
                    simulation = Some(SimulationSummary::Witness {
                        trial,
                        final_time: trajectory.final_time(),
                        max_norm: trajectory.max_norm(),
                        trajectory_csv: None,
                    });
                    witness = Some(trajectory);
                }
                None => {}
            }
        }
    }

    let verdict = if certificate.is_some() {
        Verdict::GuesCertified
    } else if witness.is_some() {
        Verdict::GrowthWitness
    } else {
        Verdict::Undecided
    };
    let robustness_radius = certificate.as_ref().map(|c| c.certificate.robustness_radius);
    Analysis {
        report: StabilityReport {
            input,
            seed: opts.seed,
            classification,
            certificate,
            verdict,
            simulation,
            robustness_radius,
            errors: st.errors,
            timings: st.timings,
        },
        witness,
    }
}

/// Default location of the witness CSV written next to a problem file.
pub fn default_witness_path(problem: &Path) -> PathBuf {
    problem.with_extension("witness.csv")
}

/// [`analyze`] followed by writing the witness trajectory, if any, to
/// `witness_csv`. A growth verdict is downgraded to undecided if the file
/// cannot be written, since the verdict must point at an existing file.
pub fn analyze_with_witness(family: &MatrixFamily, opts: &AnalyzeOptions, witness_csv: &Path) -> StabilityReport {
    let Analysis { mut report, witness } = analyze(family, opts);
    if let Some(traj) = witness {
        match traj.save_csv(witness_csv) {
            Ok(()) => {
                if let Some(SimulationSummary::Witness { trajectory_csv, .. }) = &mut report.simulation {
                    *trajectory_csv = Some(witness_csv.display().to_string());
                }
            }
            Err(e) => {
                report.errors.push(StageError {
                    stage: "witness_csv".into(),
                    message: e.to_string(),
                });
                report.verdict = Verdict::Undecided;
            }
        }
    }
    report
}

/// Pretty JSON with struct-declaration key order and explicit nulls.
pub fn report_to_json(report: &StabilityReport) -> String {
    serde_json::to_string_pretty(report).expect("reports contain only finite numbers")
}

pub fn report_from_json(text: &str) -> Result<StabilityReport> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}
