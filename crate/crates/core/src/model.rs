//! Discrete measure spaces, simple functions, extended-real bounds and the
//! constrained problem built on top of them.
//!
//! Every function lives on a finite set of atoms `ω_1, …, ω_M` carrying
//! positive weights `μ_i`. Integrals become weighted sums and "almost
//! everywhere" statements become statements about every atom.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite weighted counting measure.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSpace {
    weights: Vec<f64>,
}

impl MeasureSpace {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptySpace);
        }
        if let Some((index, &value)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::InvalidWeight { index, value });
        }
        Ok(Self { weights })
    }

    /// `m` atoms of mass `1/m`, i.e. the midpoint rule on `(0, 1)`.
    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::EmptySpace);
        }
        Self::new(vec![1.0 / m as f64; m])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// A copy of this space with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.weights.iter().map(|w| w * factor).collect())
    }

    fn check(&self, what: &str, f: &SimpleFunction) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::DimensionMismatch {
                what: what.to_string(),
                expected: self.len(),
                found: f.len(),
            });
        }
        Ok(())
    }

    /// The duality pairing `⟨g, x⟩ = Σ g_i x_i μ_i`.
    pub fn pairing(&self, g: &SimpleFunction, x: &SimpleFunction) -> Result<f64> {
        self.check("pairing: first argument", g)?;
        self.check("pairing: second argument", x)?;
        Ok(self.pairing_unchecked(g.values(), x.values()))
    }

    pub(crate) fn pairing_unchecked(&self, g: &[f64], x: &[f64]) -> f64 {
        g.iter()
            .zip(x)
            .zip(&self.weights)
            .map(|((g, x), w)| g * x * w)
            .sum()
    }

    /// Discrete `L^p` norm; the essential supremum for `p = ∞`.
    pub fn lp_norm(&self, x: &SimpleFunction, p: Exponent) -> Result<f64> {
        self.check("lp_norm", x)?;
        Ok(self.lp_norm_unchecked(x.values(), p))
    }

    pub(crate) fn lp_norm_unchecked(&self, x: &[f64], p: Exponent) -> f64 {
        match p {
            Exponent::Infinity => x.iter().fold(0.0, |m, v| m.max(v.abs())),
            Exponent::Finite(1.0) => x
                .iter()
                .zip(&self.weights)
                .map(|(v, w)| v.abs() * w)
                .sum(),
            Exponent::Finite(p) => {
                // Scale by the largest entry so that large p does not overflow.
                let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if peak == 0.0 {
                    return 0.0;
                }
                let sum: f64 = x
                    .iter()
                    .zip(&self.weights)
                    .map(|(v, w)| (v.abs() / peak).powf(p) * w)
                    .sum();
                peak * sum.powf(1.0 / p)
            }
        }
    }
}

/// The exponent `p ∈ [1, ∞]` of the underlying Lebesgue space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p == f64::INFINITY {
            Ok(Exponent::Infinity)
        } else if p.is_finite() && p >= 1.0 {
            Ok(Exponent::Finite(p))
        } else {
            Err(Error::InvalidExponent(p))
        }
    }

    /// The conjugate exponent `p'` with `1/p + 1/p' = 1`.
    pub fn conjugate(self) -> Exponent {
        match self {
            Exponent::Infinity => Exponent::Finite(1.0),
            Exponent::Finite(1.0) => Exponent::Infinity,
            Exponent::Finite(p) => Exponent::Finite(p / (p - 1.0)),
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Exponent::Finite(p) => p,
            Exponent::Infinity => f64::INFINITY,
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => f.write_str("inf"),
        }
    }
}

/// A real-valued function on the atoms of a [`MeasureSpace`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimpleFunction(Vec<f64>);

impl SimpleFunction {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn constant(m: usize, value: f64) -> Self {
        Self(vec![value; m])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn max_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self(self.0.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }

    /// `self + factor · other`, atom by atom.
    pub fn axpy(&self, factor: f64, other: &SimpleFunction) -> Self {
        Self(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + factor * b)
                .collect(),
        )
    }
}

impl From<Vec<f64>> for SimpleFunction {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl Index<usize> for SimpleFunction {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for SimpleFunction {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Per-atom extended-real bound. `±∞` are stored as IEEE infinities; NaN is
/// rejected at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtBound(Vec<f64>);

impl ExtBound {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(index) = values.iter().position(|v| v.is_nan()) {
            return Err(Error::InvalidBound {
                index,
                reason: "NaN is not an extended real".into(),
            });
        }
        Ok(Self(values))
    }

    pub fn constant(m: usize, value: f64) -> Self {
        Self(vec![value; m])
    }

    pub fn unbounded_below(m: usize) -> Self {
        Self::constant(m, f64::NEG_INFINITY)
    }

    pub fn unbounded_above(m: usize) -> Self {
        Self::constant(m, f64::INFINITY)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for ExtBound {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// `⟨g, x⟩ ≤ a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearInequality {
    pub g: SimpleFunction,
    pub a: f64,
}

/// `⟨h, x⟩ = b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearEquality {
    pub h: SimpleFunction,
    pub b: f64,
}

/// A smooth scalar constraint `G(x) ≤ 0`.
///
/// `gradient` returns the representer of `G'(x)` with respect to the pairing,
/// so that `G'(x) d = ⟨gradient(x), d⟩`.
pub trait NonlinearConstraint: fmt::Debug + Send + Sync {
    fn value(&self, space: &MeasureSpace, x: &SimpleFunction) -> f64;
    fn gradient(&self, space: &MeasureSpace, x: &SimpleFunction) -> SimpleFunction;

    /// Quadratic constraints can be written back to a problem file.
    fn as_quadratic(&self) -> Option<&QuadraticConstraint> {
        None
    }
}

/// `G(x) = ½ Σ_{ik} Q_ik x_i x_k μ_i μ_k + ⟨q, x⟩ + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticConstraint {
    pub q_matrix: Vec<Vec<f64>>,
    pub q: SimpleFunction,
    pub c: f64,
}

impl NonlinearConstraint for QuadraticConstraint {
    fn value(&self, space: &MeasureSpace, x: &SimpleFunction) -> f64 {
        let w = space.weights();
        let mut quad = 0.0;
        for (i, row) in self.q_matrix.iter().enumerate() {
            for (k, qik) in row.iter().enumerate() {
                quad += qik * x[i] * x[k] * w[i] * w[k];
            }
        }
        0.5 * quad + space.pairing_unchecked(self.q.values(), x.values()) + self.c
    }

    fn gradient(&self, space: &MeasureSpace, x: &SimpleFunction) -> SimpleFunction {
        let w = space.weights();
        let m = x.len();
        let mut grad = self.q.clone();
        for i in 0..m {
            let mut acc = 0.0;
            for k in 0..m {
                acc += (self.q_matrix[i][k] + self.q_matrix[k][i]) * x[k] * w[k];
            }
            grad[i] += 0.5 * acc;
        }
        grad
    }

    fn as_quadratic(&self) -> Option<&QuadraticConstraint> {
        Some(self)
    }
}

/// Box constraints `lower ≤ x ≤ upper` together with finitely many linear
/// and smooth nonlinear constraints on a discrete measure space.
#[derive(Debug, Clone)]
pub struct Problem {
    space: MeasureSpace,
    p: Exponent,
    lower: ExtBound,
    upper: ExtBound,
    ineq: Vec<LinearInequality>,
    eq: Vec<LinearEquality>,
    nonlinear: Vec<Arc<dyn NonlinearConstraint>>,
}

impl Problem {
    pub fn builder(space: MeasureSpace) -> ProblemBuilder {
        let m = space.len();
        ProblemBuilder {
            space,
            p: Exponent::Finite(2.0),
            lower: ExtBound::unbounded_below(m),
            upper: ExtBound::unbounded_above(m),
            ineq: Vec::new(),
            eq: Vec::new(),
            nonlinear: Vec::new(),
        }
    }

    pub fn space(&self) -> &MeasureSpace {
        &self.space
    }

    /// Number of atoms.
    pub fn m(&self) -> usize {
        self.space.len()
    }

    pub fn exponent(&self) -> Exponent {
        self.p
    }

    pub fn lower(&self) -> &ExtBound {
        &self.lower
    }

    pub fn upper(&self) -> &ExtBound {
        &self.upper
    }

    pub fn inequalities(&self) -> &[LinearInequality] {
        &self.ineq
    }

    pub fn equalities(&self) -> &[LinearEquality] {
        &self.eq
    }

    pub fn nonlinear(&self) -> &[Arc<dyn NonlinearConstraint>] {
        &self.nonlinear
    }

    /// Same box and space, different linear system. Nonlinear constraints are
    /// carried over.
    pub fn with_linear_system(
        &self,
        ineq: Vec<LinearInequality>,
        eq: Vec<LinearEquality>,
    ) -> Result<Problem> {
        let mut builder = Problem::builder(self.space.clone())
            .exponent(self.p)
            .bounds(self.lower.clone(), self.upper.clone());
        builder.ineq = ineq;
        builder.eq = eq;
        builder.nonlinear = self.nonlinear.clone();
        builder.build()
    }

    /// The linear system alone: infinite bounds, no nonlinear constraints.
    pub fn polyhedron_part(&self) -> Problem {
        let m = self.m();
        Problem {
            space: self.space.clone(),
            p: self.p,
            lower: ExtBound::unbounded_below(m),
            upper: ExtBound::unbounded_above(m),
            ineq: self.ineq.clone(),
            eq: self.eq.clone(),
            nonlinear: Vec::new(),
        }
    }

    /// Same problem with the nonlinear constraints removed.
    pub fn linear_part(&self) -> Problem {
        let mut prob = self.clone();
        prob.nonlinear.clear();
        prob
    }

    pub fn pairing(&self, g: &SimpleFunction, x: &SimpleFunction) -> Result<f64> {
        self.space.pairing(g, x)
    }

    pub fn lp_norm(&self, x: &SimpleFunction, p: Exponent) -> Result<f64> {
        self.space.lp_norm(x, p)
    }

    pub(crate) fn check_len(&self, what: &str, x: &SimpleFunction) -> Result<()> {
        self.space.check(what, x)
    }

    /// `true` iff `lower_i < upper_i` at every atom.
    pub fn has_nondegenerate_box(&self) -> bool {
        self.lower
            .values()
            .iter()
            .zip(self.upper.values())
            .all(|(l, u)| l < u)
    }

    pub fn in_box(&self, x: &SimpleFunction, tol: f64) -> bool {
        x.iter()
            .zip(self.lower.values())
            .zip(self.upper.values())
            .all(|((&x, &l), &u)| l - tol <= x && x <= u + tol)
    }

    /// Check `x ∈ K ∩ P ∩ Q` up to the absolute tolerance `tol`.
    pub fn check_feasible(&self, x: &SimpleFunction, tol: f64) -> Result<FeasibilityReport> {
        self.check_len("point", x)?;
        let mut violations = Vec::new();
        for i in 0..self.m() {
            let (l, u) = (self.lower[i], self.upper[i]);
            if x[i] < l - tol {
                violations.push(Violation {
                    kind: ViolationKind::Lower,
                    index: i,
                    residual: l - x[i],
                });
            }
            if x[i] > u + tol {
                violations.push(Violation {
                    kind: ViolationKind::Upper,
                    index: i,
                    residual: x[i] - u,
                });
            }
        }
        for (i, c) in self.ineq.iter().enumerate() {
            let r = self.space.pairing_unchecked(c.g.values(), x.values()) - c.a;
            if r > tol {
                violations.push(Violation {
                    kind: ViolationKind::Inequality,
                    index: i,
                    residual: r,
                });
            }
        }
        for (j, c) in self.eq.iter().enumerate() {
            let r = self.space.pairing_unchecked(c.h.values(), x.values()) - c.b;
            if r.abs() > tol {
                violations.push(Violation {
                    kind: ViolationKind::Equality,
                    index: j,
                    residual: r.abs(),
                });
            }
        }
        for (i, c) in self.nonlinear.iter().enumerate() {
            let r = c.value(&self.space, x);
            if r > tol || r.is_nan() {
                violations.push(Violation {
                    kind: ViolationKind::Nonlinear,
                    index: i,
                    residual: r,
                });
            }
        }
        Ok(FeasibilityReport {
            feasible: violations.is_empty(),
            violations,
        })
    }

    /// Classify every atom by bound activity and collect the active linear
    /// and nonlinear inequalities at a feasible `x`.
    pub fn regions(&self, x: &SimpleFunction, tol: f64) -> Result<RegionPartition> {
        let report = self.check_feasible(x, tol)?;
        if !report.feasible {
            return Err(Error::Infeasible(report.summary()));
        }
        let mut part = self.box_regions_unchecked(x, tol);
        part.lin_active = self
            .ineq
            .iter()
            .enumerate()
            .filter(|(_, c)| {
                let v = self.space.pairing_unchecked(c.g.values(), x.values());
                (v - c.a).abs() <= tol * c.a.abs().max(1.0)
            })
            .map(|(i, _)| i)
            .collect();
        part.nl_active = self
            .nonlinear
            .iter()
            .enumerate()
            .filter(|(_, c)| c.value(&self.space, x).abs() <= tol)
            .map(|(i, _)| i)
            .collect();
        Ok(part)
    }

    /// Bound activity only; requires `x ∈ K` up to `tol`.
    pub fn box_regions(&self, x: &SimpleFunction, tol: f64) -> Result<RegionPartition> {
        self.check_len("point", x)?;
        if let Some(atom) = (0..self.m())
            .find(|&i| !(self.lower[i] - tol <= x[i] && x[i] <= self.upper[i] + tol))
        {
            return Err(Error::NotInBox { atom });
        }
        Ok(self.box_regions_unchecked(x, tol))
    }

    fn box_regions_unchecked(&self, x: &SimpleFunction, tol: f64) -> RegionPartition {
        let mut atoms = Vec::with_capacity(self.m());
        for i in 0..self.m() {
            let scale = x[i].abs().max(1.0);
            let at_lower = self.lower[i].is_finite() && x[i] - self.lower[i] <= tol * scale;
            let at_upper = self.upper[i].is_finite() && self.upper[i] - x[i] <= tol * scale;
            atoms.push(match (at_lower, at_upper) {
                (true, true) => Activity::BothActive,
                (true, false) => Activity::LowerActive,
                (false, true) => Activity::UpperActive,
                (false, false) => Activity::Free,
            });
        }
        RegionPartition {
            atoms,
            lin_active: Vec::new(),
            nl_active: Vec::new(),
        }
    }
}

pub struct ProblemBuilder {
    space: MeasureSpace,
    p: Exponent,
    lower: ExtBound,
    upper: ExtBound,
    ineq: Vec<LinearInequality>,
    eq: Vec<LinearEquality>,
    nonlinear: Vec<Arc<dyn NonlinearConstraint>>,
}

impl ProblemBuilder {
    pub fn exponent(mut self, p: Exponent) -> Self {
        self.p = p;
        self
    }

    pub fn bounds(mut self, lower: ExtBound, upper: ExtBound) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn lower(mut self, lower: ExtBound) -> Self {
        self.lower = lower;
        self
    }

    pub fn upper(mut self, upper: ExtBound) -> Self {
        self.upper = upper;
        self
    }

    pub fn inequality(mut self, g: impl Into<SimpleFunction>, a: f64) -> Self {
        self.ineq.push(LinearInequality { g: g.into(), a });
        self
    }

    pub fn equality(mut self, h: impl Into<SimpleFunction>, b: f64) -> Self {
        self.eq.push(LinearEquality { h: h.into(), b });
        self
    }

    pub fn nonlinear(mut self, c: Arc<dyn NonlinearConstraint>) -> Self {
        self.nonlinear.push(c);
        self
    }

    pub fn build(self) -> Result<Problem> {
        let m = self.space.len();
        if let Exponent::Finite(p) = self.p {
            if !(p.is_finite() && p >= 1.0) {
                return Err(Error::InvalidExponent(p));
            }
        }
        for (what, b) in [("lower", &self.lower), ("upper", &self.upper)] {
            if b.len() != m {
                return Err(Error::DimensionMismatch {
                    what: what.into(),
                    expected: m,
                    found: b.len(),
                });
            }
        }
        for i in 0..m {
            let (l, u) = (self.lower[i], self.upper[i]);
            if l == f64::INFINITY || u == f64::NEG_INFINITY || l > u {
                return Err(Error::VoidProblem { atom: i });
            }
        }
        for (i, c) in self.ineq.iter().enumerate() {
            check_data(&format!("ineq[{i}].g"), &c.g, c.a, m)?;
        }
        for (j, c) in self.eq.iter().enumerate() {
            check_data(&format!("eq[{j}].h"), &c.h, c.b, m)?;
        }
        for (i, c) in self.nonlinear.iter().enumerate() {
            if let Some(q) = c.as_quadratic() {
                let square = q.q_matrix.len() == m && q.q_matrix.iter().all(|r| r.len() == m);
                if !square {
                    return Err(Error::DimensionMismatch {
                        what: format!("quad_ineq[{i}].Q"),
                        expected: m,
                        found: q.q_matrix.len(),
                    });
                }
                check_data(&format!("quad_ineq[{i}].q"), &q.q, q.c, m)?;
            }
        }
        Ok(Problem {
            space: self.space,
            p: self.p,
            lower: self.lower,
            upper: self.upper,
            ineq: self.ineq,
            eq: self.eq,
            nonlinear: self.nonlinear,
        })
    }
}

fn check_data(what: &str, f: &SimpleFunction, rhs: f64, m: usize) -> Result<()> {
    if f.len() != m {
        return Err(Error::DimensionMismatch {
            what: what.into(),
            expected: m,
            found: f.len(),
        });
    }
    if !rhs.is_finite() || f.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotFinite(what.into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Lower,
    Upper,
    Inequality,
    Equality,
    Nonlinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Atom index for bound violations, constraint index otherwise.
    pub index: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn worst_residual(&self) -> f64 {
        self.violations.iter().fold(0.0, |m, v| m.max(v.residual))
    }

    pub fn summary(&self) -> String {
        match self.violations.first() {
            None => "feasible".into(),
            Some(v) => format!(
                "{} violated constraint(s), first: {:?} #{} (residual {:e}), worst residual {:e}",
                self.violations.len(),
                v.kind,
                v.index,
                v.residual,
                self.worst_residual()
            ),
        }
    }
}

/// Bound activity of a single atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activity {
    /// `lower = x = upper` (including degenerate atoms with `lower = upper`).
    BothActive,
    /// `lower = x < upper`.
    LowerActive,
    /// `lower < x < upper`.
    Free,
    /// `lower < x = upper`.
    UpperActive,
}

/// The pointwise region sets and the active constraint sets at a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPartition {
    pub atoms: Vec<Activity>,
    pub lin_active: Vec<usize>,
    pub nl_active: Vec<usize>,
}

impl RegionPartition {
    pub fn indices(&self, kind: Activity) -> Vec<usize> {
        self.atoms
            .iter()
            .enumerate()
            .filter(|(_, a)| **a == kind)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn both_active(&self) -> Vec<usize> {
        self.indices(Activity::BothActive)
    }

    pub fn lower_active(&self) -> Vec<usize> {
        self.indices(Activity::LowerActive)
    }

    pub fn free(&self) -> Vec<usize> {
        self.indices(Activity::Free)
    }

    pub fn upper_active(&self) -> Vec<usize> {
        self.indices(Activity::UpperActive)
    }

    pub fn is_lower_active(&self, i: usize) -> bool {
        matches!(self.atoms[i], Activity::LowerActive | Activity::BothActive)
    }

    pub fn is_upper_active(&self, i: usize) -> bool {
        matches!(self.atoms[i], Activity::UpperActive | Activity::BothActive)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn half_half() -> MeasureSpace {
        MeasureSpace::new(vec![0.5, 0.5]).unwrap()
    }

    fn counterexample(m: usize) -> Problem {
        Problem::builder(MeasureSpace::uniform(m).unwrap())
            .bounds(ExtBound::constant(m, 0.0), ExtBound::unbounded_above(m))
            .inequality(SimpleFunction::constant(m, 1.0), 0.0)
            .build()
            .unwrap()
    }

    #[test]
    fn pairing_examples() {
        let s = half_half();
        let v = s
            .pairing(&vec![1.0, 1.0].into(), &vec![2.0, 4.0].into())
            .unwrap();
        assert_eq!(v, 3.0);
        let v = s
            .pairing(&vec![3.0, -7.0].into(), &SimpleFunction::zeros(2))
            .unwrap();
        assert_eq!(v, 0.0);
        let q = MeasureSpace::new(vec![0.25; 4]).unwrap();
        let one = SimpleFunction::constant(4, 1.0);
        assert_eq!(q.pairing(&one, &one).unwrap(), 1.0);
    }

    #[test]
    fn pairing_dimension_mismatch() {
        let err = half_half()
            .pairing(&vec![1.0].into(), &vec![1.0, 2.0].into())
            .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn lp_norm_examples() {
        let s = half_half();
        let n = |x: Vec<f64>, p| s.lp_norm(&x.into(), p).unwrap();
        assert_eq!(n(vec![3.0, -4.0], Exponent::Infinity), 4.0);
        assert_relative_eq!(n(vec![1.0, 1.0], Exponent::Finite(2.0)), 1.0);
        assert_eq!(n(vec![2.0, 0.0], Exponent::Finite(1.0)), 1.0);
        assert_eq!(n(vec![0.0, 0.0], Exponent::Finite(3.0)), 0.0);
    }

    #[test]
    fn conjugate_exponents() {
        assert_eq!(Exponent::Finite(2.0).conjugate(), Exponent::Finite(2.0));
        assert_eq!(Exponent::Finite(1.0).conjugate(), Exponent::Infinity);
        assert_eq!(Exponent::Infinity.conjugate(), Exponent::Finite(1.0));
        assert!(Exponent::new(0.5).is_err());
        assert_eq!(Exponent::new(f64::INFINITY).unwrap(), Exponent::Infinity);
    }

    #[test]
    fn invalid_spaces_and_bounds() {
        assert!(matches!(MeasureSpace::new(vec![]), Err(Error::EmptySpace)));
        assert!(matches!(
            MeasureSpace::new(vec![1.0, 0.0]),
            Err(Error::InvalidWeight { index: 1, .. })
        ));
        let void = Problem::builder(half_half())
            .bounds(ExtBound::constant(2, 1.0), ExtBound::constant(2, 0.0))
            .build();
        assert!(matches!(void, Err(Error::VoidProblem { atom: 0 })));
        let bad_len = Problem::builder(half_half())
            .inequality(vec![1.0], 0.0)
            .build();
        assert!(matches!(bad_len, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn counterexample_feasibility() {
        let prob = counterexample(2);
        assert!(prob.check_feasible(&SimpleFunction::zeros(2), 1e-9).unwrap().feasible);
        let report = prob
            .check_feasible(&vec![0.1, 0.1].into(), 1e-9)
            .unwrap();
        assert!(!report.feasible);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].kind, ViolationKind::Inequality);
        assert_relative_eq!(report.violations[0].residual, 0.1);
    }

    #[test]
    fn interior_point_of_unit_box_is_feasible() {
        let prob = Problem::builder(MeasureSpace::uniform(3).unwrap())
            .bounds(ExtBound::constant(3, 0.0), ExtBound::constant(3, 1.0))
            .build()
            .unwrap();
        let x = SimpleFunction::constant(3, 0.5);
        assert!(prob.check_feasible(&x, 1e-9).unwrap().feasible);
    }

    #[test]
    fn region_examples() {
        let prob = Problem::builder(MeasureSpace::uniform(3).unwrap())
            .bounds(ExtBound::constant(3, 0.0), ExtBound::constant(3, 1.0))
            .build()
            .unwrap();
        let part = prob.regions(&vec![0.0, 0.5, 1.0].into(), 1e-9).unwrap();
        assert_eq!(part.lower_active(), vec![0]);
        assert_eq!(part.free(), vec![1]);
        assert_eq!(part.upper_active(), vec![2]);
        assert!(part.both_active().is_empty());

        let degenerate = Problem::builder(MeasureSpace::uniform(1).unwrap())
            .bounds(ExtBound::constant(1, 0.0), ExtBound::constant(1, 0.0))
            .build()
            .unwrap();
        let part = degenerate.regions(&vec![0.0].into(), 1e-9).unwrap();
        assert_eq!(part.both_active(), vec![0]);

        let part = counterexample(2).regions(&SimpleFunction::zeros(2), 1e-9).unwrap();
        assert_eq!(part.lower_active(), vec![0, 1]);
        assert_eq!(part.lin_active, vec![0]);
    }

    #[test]
    fn regions_reject_infeasible_points() {
        let err = counterexample(2)
            .regions(&vec![0.1, 0.1].into(), 1e-9)
            .unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn activity_tolerance_is_relative() {
        let prob = Problem::builder(MeasureSpace::uniform(1).unwrap())
            .bounds(ExtBound::constant(1, 1e6), ExtBound::unbounded_above(1))
            .build()
            .unwrap();
        // gap 1e-4 ≤ 1e-9 · 1e6 · (1 + 1e-10)
        let part = prob.box_regions(&vec![1e6 + 1e-4].into(), 1e-9).unwrap();
        assert_eq!(part.atoms, vec![Activity::LowerActive]);
    }

    #[test]
    fn quadratic_constraint_value_and_gradient() {
        let space = MeasureSpace::new(vec![1.0]).unwrap();
        let g = QuadraticConstraint {
            q_matrix: vec![vec![2.0]],
            q: vec![0.0].into(),
            c: -1.0,
        };
        let x: SimpleFunction = vec![1.0].into();
        assert_eq!(g.value(&space, &x), 0.0);
        assert_eq!(g.gradient(&space, &x).values(), &[2.0]);
    }
}
