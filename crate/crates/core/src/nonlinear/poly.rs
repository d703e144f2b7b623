use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TrigKind {
    Sin2,
    Cos2,
}

/// A `sin²(x_var)` or `cos²(x_var)` factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrigFactor {
    pub kind: TrigKind,
    pub var: usize,
}

impl TrigFactor {
    fn eval(&self, x: &DVector<f64>) -> f64 {
        match self.kind {
            TrigKind::Sin2 => x[self.var].sin().powi(2),
            TrigKind::Cos2 => x[self.var].cos().powi(2),
        }
    }

    fn parse(tag: &str, n: usize) -> Result<Self> {
        let (kind, var) = tag
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("trig tag `{tag}` must look like `sin2:0`")))?;
        let kind = match kind.trim() {
            "sin2" => TrigKind::Sin2,
            "cos2" => TrigKind::Cos2,
            other => return Err(Error::Parse(format!("unknown trig kind `{other}`"))),
        };
        let var: usize = var
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad trig variable in `{tag}`")))?;
        if var >= n {
            return Err(Error::Parse(format!("trig variable {var} out of range")));
        }
        Ok(Self { kind, var })
    }
}

impl fmt::Display for TrigFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            TrigKind::Sin2 => "sin2",
            TrigKind::Cos2 => "cos2",
        };
        write!(f, "{k}:{}", self.var)
    }
}

/// `x^powers`, optionally times one trigonometric factor.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    pub powers: Vec<u32>,
    pub trig: Option<TrigFactor>,
}

impl Monomial {
    pub fn degree(&self) -> u32 {
        self.powers.iter().sum()
    }

    fn eval(&self, x: &DVector<f64>) -> f64 {
        let mono: f64 = self
            .powers
            .iter()
            .enumerate()
            .map(|(i, &p)| x[i].powi(p as i32))
            .product();
        mono * self.trig.map_or(1.0, |t| t.eval(x))
    }

    /// Value of the monomial at the origin.
    fn at_origin(&self) -> f64 {
        if self.degree() > 0 {
            return 0.0;
        }
        match self.trig {
            None => 1.0,
            Some(TrigFactor { kind: TrigKind::Cos2, .. }) => 1.0,
            Some(TrigFactor { kind: TrigKind::Sin2, .. }) => 0.0,
        }
    }
}

/// Sparse real polynomial in `n` variables.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, c)| (m, *c))
    }

    pub fn add_term(&mut self, mono: Monomial, coeff: f64) {
        let entry = self.terms.entry(mono.clone()).or_insert(0.0);
        *entry += coeff;
        if *entry == 0.0 {
            self.terms.remove(&mono);
        }
    }

    pub fn has_trig(&self) -> bool {
        self.terms.keys().any(|m| m.trig.is_some())
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().map(|c| c.abs()).fold(0.0, f64::max)
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.terms.iter().map(|(m, c)| c * m.eval(x)).sum()
    }

    fn pure_terms(&self) -> Result<impl Iterator<Item = (&Vec<u32>, f64)>> {
        if self.has_trig() {
            return Err(Error::TrigUnsupported);
        }
        Ok(self.terms.iter().map(|(m, c)| (&m.powers, *c)))
    }

    /// `∂/∂x_var` of a trig-free polynomial.
    pub fn derivative(&self, var: usize) -> Result<Self> {
        let mut out = Self::zero();
        for (powers, c) in self.pure_terms()? {
            let p = powers[var];
            if p == 0 {
                continue;
            }
            let mut np = powers.clone();
            np[var] -= 1;
            out.add_term(Monomial { powers: np, trig: None }, c * p as f64);
        }
        Ok(out)
    }

    /// Product of two trig-free polynomials.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        let mut out = Self::zero();
        let rhs: Vec<(&Vec<u32>, f64)> = other.pure_terms()?.collect();
        for (pa, ca) in self.pure_terms()? {
            for (pb, cb) in &rhs {
                let powers = pa.iter().zip(pb.iter()).map(|(a, b)| a + b).collect();
                out.add_term(Monomial { powers, trig: None }, ca * cb);
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in other.terms() {
            out.add_term(m.clone(), c);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = Self::zero();
        for (m, c) in self.terms() {
            out.add_term(m.clone(), c * s);
        }
        out
    }
}

/// One entry of the JSON term list describing a vector field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSpec {
    /// Zero-based output component.
    pub component: usize,
    pub coeff: f64,
    pub powers: Vec<u32>,
    /// `"sin2:<var>"` or `"cos2:<var>"`, zero-based variable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trig: Option<String>,
}

/// Vector field whose components are polynomials (optionally with one
/// `sin²`/`cos²` factor per term), vanishing at the origin.
#[derive(Debug, Clone)]
pub struct PolyVectorField {
    n: usize,
    components: Vec<Polynomial>,
    flat: Vec<FlatTerm>,
}

impl PartialEq for PolyVectorField {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.components == other.components
    }
}

/// Evaluation-friendly copy of one term.
#[derive(Debug, Clone)]
struct FlatTerm {
    component: usize,
    coeff: f64,
    powers: Vec<(usize, i32)>,
    trig: Option<TrigFactor>,
}

impl FlatTerm {
    fn eval(&self, x: &[f64]) -> f64 {
        let mut v = self.coeff;
        for &(i, p) in &self.powers {
            v *= if p == 1 { x[i] } else { x[i].powi(p) };
        }
        match self.trig {
            Some(TrigFactor { kind: TrigKind::Sin2, var }) => v * x[var].sin().powi(2),
            Some(TrigFactor { kind: TrigKind::Cos2, var }) => v * x[var].cos().powi(2),
            None => v,
        }
    }
}

impl PolyVectorField {
    pub fn new(components: Vec<Polynomial>) -> Result<Self> {
        let n = components.len();
        if n == 0 {
            return Err(Error::InvalidArgument("vector field needs at least one component".into()));
        }
        for comp in &components {
            for (m, c) in comp.terms() {
                if m.powers.len() != n {
                    return Err(Error::Parse(format!(
                        "monomial has {} exponents, expected {n}",
                        m.powers.len()
                    )));
                }
                if !c.is_finite() {
                    return Err(Error::Parse("coefficients must be finite".into()));
                }
                if m.trig.is_some_and(|t| t.var >= n) {
                    return Err(Error::Parse("trig variable out of range".into()));
                }
                if m.at_origin() != 0.0 {
                    return Err(Error::InvalidArgument(
                        "vector field must vanish at the origin".into(),
                    ));
                }
            }
        }
        Ok(Self::build(n, components))
    }

    /// `x ↦ A x`.
    pub fn linear(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        let components = (0..n)
            .map(|i| {
                let mut p = Polynomial::zero();
                for j in 0..n {
                    if a[(i, j)] != 0.0 {
                        let mut powers = vec![0; n];
                        powers[j] = 1;
                        p.add_term(Monomial { powers, trig: None }, a[(i, j)]);
                    }
                }
                p
            })
            .collect();
        Self::new(components)
    }

    pub fn from_terms(n: usize, terms: &[TermSpec]) -> Result<Self> {
        let mut components = vec![Polynomial::zero(); n];
        for t in terms {
            if t.component >= n {
                return Err(Error::Parse(format!("component {} out of range", t.component)));
            }
            if t.powers.len() != n {
                return Err(Error::Parse(format!(
                    "term has {} exponents, expected {n}",
                    t.powers.len()
                )));
            }
            let trig = t.trig.as_deref().map(|s| TrigFactor::parse(s, n)).transpose()?;
            components[t.component].add_term(
                Monomial {
                    powers: t.powers.clone(),
                    trig,
                },
                t.coeff,
            );
        }
        Self::new(components)
    }

    pub fn to_terms(&self) -> Vec<TermSpec> {
        self.components
            .iter()
            .enumerate()
            .flat_map(|(i, p)| {
                p.terms().map(move |(m, c)| TermSpec {
                    component: i,
                    coeff: c,
                    powers: m.powers.clone(),
                    trig: m.trig.map(|t| t.to_string()),
                })
            })
            .collect()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn components(&self) -> &[Polynomial] {
        &self.components
    }

    pub fn has_trig(&self) -> bool {
        self.components.iter().any(|p| p.has_trig())
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.components.iter().all(|p| p.max_abs_coeff() <= tol)
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        self.eval_into(x.as_slice(), out.as_mut_slice());
        out
    }

    /// Writes `f(x)` into `out` without allocating.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for t in &self.flat {
            out[t.component] += t.eval(x);
        }
    }

    /// `∂f/∂x` with polynomial entries.
    pub fn jacobian(&self) -> Result<Vec<Vec<Polynomial>>> {
        self.components
            .iter()
            .map(|p| (0..self.n).map(|j| p.derivative(j)).collect())
            .collect()
    }

    /// `α f + (1 - α) g`.
    pub fn convex_combination(&self, other: &Self, alpha: f64) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                rows: other.n,
                cols: 1,
            });
        }
        Ok(self.scale(alpha).add(&other.scale(1.0 - alpha)))
    }

    pub fn add(&self, other: &Self) -> Self {
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.add(b))
            .collect();
        Self::build(self.n, components)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::build(self.n, self.components.iter().map(|p| p.scale(s)).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    fn build(n: usize, components: Vec<Polynomial>) -> Self {
        let flat = components
            .iter()
            .enumerate()
            .flat_map(|(i, p)| {
                p.terms().map(move |(m, c)| FlatTerm {
                    component: i,
                    coeff: c,
                    powers: m
                        .powers
                        .iter()
                        .enumerate()
                        .filter(|(_, &e)| e > 0)
                        .map(|(j, &e)| (j, e as i32))
                        .collect(),
                    trig: m.trig,
                })
            })
            .collect();
        Self { n, components, flat }
    }
}

/// `[f, g] = (∂g/∂x) f - (∂f/∂x) g`, computed on coefficients.
pub fn poly_bracket(f: &PolyVectorField, g: &PolyVectorField) -> Result<PolyVectorField> {
    if f.n != g.n {
        return Err(Error::DimensionMismatch {
            expected: f.n,
            rows: g.n,
            cols: 1,
        });
    }
    if f.has_trig() || g.has_trig() {
        return Err(Error::TrigUnsupported);
    }
    let jf = f.jacobian()?;
    let jg = g.jacobian()?;
    let mut components = Vec::with_capacity(f.n);
    for i in 0..f.n {
        let mut acc = Polynomial::zero();
        for j in 0..f.n {
            acc = acc.add(&jg[i][j].mul(&f.components[j])?);
            acc = acc.add(&jf[i][j].mul(&g.components[j])?.scale(-1.0));
        }
        components.push(acc);
    }
    Ok(PolyVectorField::build(f.n, components))
}

/// Coefficient threshold for the exact polynomial zero test.
pub const COMMUTING_COEFF_TOL: f64 = 1e-12;

pub fn is_commuting_fields(fields: &[PolyVectorField]) -> Result<bool> {
    for i in 0..fields.len() {
        for j in (i + 1)..fields.len() {
            if !poly_bracket(&fields[i], &fields[j])?.is_zero(COMMUTING_COEFF_TOL) {
                return Ok(false);
            }
        }
    }
    // Trig terms are rejected even for single fields.
    if fields.iter().any(|f| f.has_trig()) {
        return Err(Error::TrigUnsupported);
    }
    Ok(true)
}

/// Linearization `∂f/∂x(0)`. A `sin²` factor is quadratic at the origin and
/// contributes nothing; a `cos²` factor equals 1 there with zero slope.
pub fn jacobian_at_origin(f: &PolyVectorField) -> DMatrix<f64> {
    let n = f.n;
    let mut jac = DMatrix::zeros(n, n);
    for (i, comp) in f.components.iter().enumerate() {
        for (m, c) in comp.terms() {
            if m.degree() != 1 {
                continue;
            }
            if matches!(m.trig, Some(TrigFactor { kind: TrigKind::Sin2, .. })) {
                continue;
            }
            let j = m.powers.iter().position(|&p| p == 1).expect("degree one");
            jac[(i, j)] += c;
        }
    }
    jac
}
