//! Problem files: a linear family or a list of polynomial vector fields.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{MatrixFamily, DEFAULT_TOL};
use crate::nonlinear::{PolyVectorField, TermSpec};

/// On-disk form of a linear problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearProblemFile {
    pub n: usize,
    pub matrices: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

/// On-disk form of a nonlinear problem: one term list per field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearProblemFile {
    pub fields: Vec<Vec<TermSpec>>,
    /// State dimension; inferred from the exponent vectors when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum ProblemFile {
    Linear(LinearProblemFile),
    Nonlinear(NonlinearProblemFile),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    Linear(MatrixFamily),
    Nonlinear(Vec<PolyVectorField>),
}

impl Problem {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: ProblemFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        match raw {
            ProblemFile::Linear(p) => Ok(Self::Linear(p.into_family()?)),
            ProblemFile::Nonlinear(p) => Ok(Self::Nonlinear(p.into_fields()?)),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn into_linear(self) -> Result<MatrixFamily> {
        match self {
            Self::Linear(f) => Ok(f),
            Self::Nonlinear(_) => Err(Error::Parse("expected a linear problem with `matrices`".into())),
        }
    }

    pub fn into_nonlinear(self) -> Result<Vec<PolyVectorField>> {
        match self {
            Self::Nonlinear(f) => Ok(f),
            Self::Linear(family) => family.modes().iter().map(PolyVectorField::linear).collect(),
        }
    }
}

impl LinearProblemFile {
    pub fn from_family(family: &MatrixFamily) -> Self {
        Self {
            n: family.n(),
            matrices: family.to_rows(),
            tolerance: (family.tol() != DEFAULT_TOL).then_some(family.tol()),
        }
    }

    pub fn into_family(self) -> Result<MatrixFamily> {
        let family = MatrixFamily::from_rows(&self.matrices)?;
        if family.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                rows: family.n(),
                cols: family.n(),
            });
        }
        match self.tolerance {
            Some(tol) => MatrixFamily::with_tol(family.modes().to_vec(), tol),
            None => Ok(family),
        }
    }
}

impl NonlinearProblemFile {
    pub fn into_fields(self) -> Result<Vec<PolyVectorField>> {
        if self.fields.is_empty() {
            return Err(Error::Parse("`fields` must not be empty".into()));
        }
        let n = match self.n {
            Some(n) => n,
            None => self
                .fields
                .iter()
                .flatten()
                .map(|t| t.powers.len())
                .next()
                .ok_or_else(|| Error::Parse("cannot infer dimension from empty fields; set `n`".into()))?,
        };
        self.fields
            .iter()
            .map(|terms| PolyVectorField::from_terms(n, terms))
            .collect()
    }
}
