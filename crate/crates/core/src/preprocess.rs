//! Rewrite the linear system `P` into an equivalent one whose equalities are
//! linearly independent and whose inequalities have a common strictly
//! feasible point.
//!
//! Two steps: inequalities that no point of `P` satisfies strictly become
//! equalities, then the equalities are reduced to a maximal independent
//! subset. The box constraints play no role here.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, LpOptions, LpStatus, RowKind};
use crate::model::{LinearEquality, LinearInequality, Problem, SimpleFunction};

/// Singular values below this fraction of the largest count as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// What happened to an inequality of the original system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fate", rename_all = "snake_case")]
pub enum InequalityFate {
    /// Still an inequality, at this position of the reduced system.
    Kept { index: usize },
    /// Turned into an equality, at this position of the reduced system.
    Converted { index: usize },
    /// Turned into an equality that duplicates the kept ones.
    Dropped { combination: Vec<(usize, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fate", rename_all = "snake_case")]
pub enum EqualityFate {
    Kept { index: usize },
    /// Linear combination `Σ c_k h̃_k` of kept equalities.
    Dropped { combination: Vec<(usize, f64)> },
}

/// An equivalent linear system satisfying MFCQ, with its strict witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfcqSystem {
    pub tilde_ineq: Vec<LinearInequality>,
    pub tilde_eq: Vec<LinearEquality>,
    pub witness: SimpleFunction,
    pub ineq_provenance: Vec<InequalityFate>,
    pub eq_provenance: Vec<EqualityFate>,
}

impl MfcqSystem {
    /// Smallest slack `ã_i − ⟨g̃_i, x̃⟩`; `+∞` without inequalities.
    pub fn witness_margin(&self, prob: &Problem) -> f64 {
        self.tilde_ineq
            .iter()
            .map(|c| c.a - prob.space().pairing_unchecked(c.g.values(), self.witness.values()))
            .fold(f64::INFINITY, f64::min)
    }

    /// The original problem with its linear system replaced by this one.
    pub fn to_problem(&self, prob: &Problem) -> Result<Problem> {
        prob.with_linear_system(self.tilde_ineq.clone(), self.tilde_eq.clone())
    }
}

/// An equality that depends on the kept ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedEquality {
    pub index: usize,
    /// `(position in kept, coefficient)`.
    pub combination: Vec<(usize, f64)>,
    /// Max-norm residual of `h − Σ c_k h_k`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualityReduction {
    /// Indices (into the input) of a maximal independent subset, in order.
    pub kept: Vec<usize>,
    pub dropped: Vec<DroppedEquality>,
}

fn lp_row(prob: &Problem, f: &SimpleFunction, extra: usize) -> Vec<f64> {
    let mut row: Vec<f64> = f
        .iter()
        .zip(prob.space().weights())
        .map(|(v, w)| v * w)
        .collect();
    row.resize(prob.m() + extra, 0.0);
    row
}

/// `{x : ⟨g_i, x⟩ ≤ a_i, ⟨h_j, x⟩ = b_j}` as an LP in `x` plus `extra`
/// trailing variables (left with zero coefficients).
fn polyhedron_lp(prob: &Problem, extra: usize) -> LinearProgram {
    let mut lp = LinearProgram::new(prob.m() + extra);
    for c in prob.inequalities() {
        lp.add_row(lp_row(prob, &c.g, extra), RowKind::Le, c.a);
    }
    for c in prob.equalities() {
        lp.add_row(lp_row(prob, &c.h, extra), RowKind::Eq, c.b);
    }
    lp
}

/// Indices of inequalities that hold with equality on all of `P`.
pub fn detect_implicit_equalities(prob: &Problem, tol: f64) -> Result<Vec<usize>> {
    let opts = LpOptions::with_feas_tol(tol);
    match lp::feasibility(&polyhedron_lp(prob, 0), &opts)? {
        lp::Feasibility::Feasible(_) => {}
        lp::Feasibility::Infeasible(_) => return Err(Error::EmptyPolyhedron),
        lp::Feasibility::NumericalFailure(msg) => return Err(Error::NumericalFailure(msg)),
    }
    let m = prob.m();
    let mut implicit = Vec::new();
    for i in 0..prob.inequalities().len() {
        // maximize s subject to P and ⟨g_i, x⟩ + s ≤ a_i, s ≤ 1.
        let mut lp = polyhedron_lp(prob, 1);
        lp.rows[i].coeffs[m] = 1.0;
        lp.objective[m] = 1.0;
        lp.set_bounds(m, f64::NEG_INFINITY, 1.0);
        let out = lp::solve(&lp, &opts)?;
        match out.status {
            LpStatus::Optimal if out.objective <= tol => implicit.push(i),
            LpStatus::Optimal => {}
            other => {
                return Err(Error::NumericalFailure(format!(
                    "slack LP for inequality {i} ended with {other:?}"
                )))
            }
        }
    }
    Ok(implicit)
}

fn numerical_rank(rows: &[&SimpleFunction], rank_tol: f64) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let m = rows[0].len();
    let mat = DMatrix::from_fn(rows.len(), m, |i, k| rows[i][k]);
    let sv = mat.singular_values();
    let largest = sv.iter().cloned().fold(0.0, f64::max);
    if largest == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rank_tol * largest).count()
}

/// Least-squares coefficients `c` with `Σ c_k rows_k ≈ v`.
fn combination(rows: &[&SimpleFunction], v: &SimpleFunction) -> Vec<f64> {
    if rows.is_empty() {
        return Vec::new();
    }
    let m = v.len();
    let basis = DMatrix::from_fn(m, rows.len(), |k, i| rows[i][k]);
    let rhs = DMatrix::from_fn(m, 1, |k, _| v[k]);
    let svd = basis.svd(true, true);
    match svd.solve(&rhs, 1e-14) {
        Ok(c) => c.iter().cloned().collect(),
        Err(_) => vec![0.0; rows.len()],
    }
}

/// Reduce an equality system to a maximal linearly independent subset,
/// processing equalities in order. Each dropped equality is expressed in
/// terms of the kept ones; an inconsistent right-hand side is an error.
pub fn reduce_equalities(
    eqs: &[LinearEquality],
    rank_tol: f64,
    tol: f64,
) -> Result<EqualityReduction> {
    let mut kept: Vec<usize> = Vec::new();
    let mut dropped = Vec::new();
    for (j, e) in eqs.iter().enumerate() {
        let kept_rows: Vec<&SimpleFunction> = kept.iter().map(|&k| &eqs[k].h).collect();
        let mut with = kept_rows.clone();
        with.push(&e.h);
        let zero_row = e.h.max_norm() == 0.0;
        if !zero_row && numerical_rank(&with, rank_tol) > kept.len() {
            kept.push(j);
            continue;
        }
        let coeffs = combination(&kept_rows, &e.h);
        let mut approx = SimpleFunction::zeros(e.h.len());
        let mut rhs = 0.0;
        let mut rhs_scale = e.b.abs();
        for (c, &k) in coeffs.iter().zip(&kept) {
            approx = approx.axpy(*c, &eqs[k].h);
            rhs += c * eqs[k].b;
            rhs_scale += (c * eqs[k].b).abs();
        }
        let residual = approx.axpy(-1.0, &e.h).max_norm();
        let gap = e.b - rhs;
        if gap.abs() > tol * (1.0 + rhs_scale) {
            // y = (−c on kept, 1 on j) annihilates the rows and has yᵀb = gap.
            let mut certificate = vec![0.0; eqs.len()];
            for (c, &k) in coeffs.iter().zip(&kept) {
                certificate[k] = -c;
            }
            certificate[j] = 1.0;
            if gap > 0.0 {
                certificate.iter_mut().for_each(|v| *v = -*v);
            }
            return Err(Error::InconsistentEqualities {
                index: j,
                residual: gap.abs(),
                certificate,
            });
        }
        dropped.push(DroppedEquality {
            index: j,
            combination: coeffs.into_iter().enumerate().collect(),
            residual,
        });
    }
    Ok(EqualityReduction { kept, dropped })
}

/// Build the MFCQ-equivalent system of `prob`'s linear constraints.
pub fn build_mfcq_system(prob: &Problem, tol: f64) -> Result<MfcqSystem> {
    build_mfcq_system_with(prob, tol, DEFAULT_RANK_TOL)
}

pub fn build_mfcq_system_with(prob: &Problem, tol: f64, rank_tol: f64) -> Result<MfcqSystem> {
    let implicit = detect_implicit_equalities(prob, tol)?;

    enum Source {
        Original(usize),
        Converted(usize),
    }
    let mut candidates: Vec<LinearEquality> = prob.equalities().to_vec();
    let mut sources: Vec<Source> = (0..prob.equalities().len()).map(Source::Original).collect();
    for &i in &implicit {
        let c = &prob.inequalities()[i];
        candidates.push(LinearEquality {
            h: c.g.clone(),
            b: c.a,
        });
        sources.push(Source::Converted(i));
    }
    let reduction = reduce_equalities(&candidates, rank_tol, tol)?;

    let tilde_eq: Vec<LinearEquality> = reduction.kept.iter().map(|&k| candidates[k].clone()).collect();
    let mut eq_provenance = vec![EqualityFate::Dropped { combination: Vec::new() }; prob.equalities().len()];
    let mut ineq_provenance = vec![InequalityFate::Kept { index: 0 }; prob.inequalities().len()];
    for (pos, &k) in reduction.kept.iter().enumerate() {
        match sources[k] {
            Source::Original(j) => eq_provenance[j] = EqualityFate::Kept { index: pos },
            Source::Converted(i) => ineq_provenance[i] = InequalityFate::Converted { index: pos },
        }
    }
    for d in &reduction.dropped {
        match sources[d.index] {
            Source::Original(j) => {
                eq_provenance[j] = EqualityFate::Dropped {
                    combination: d.combination.clone(),
                }
            }
            Source::Converted(i) => {
                ineq_provenance[i] = InequalityFate::Dropped {
                    combination: d.combination.clone(),
                }
            }
        }
    }
    let mut tilde_ineq = Vec::new();
    for (i, c) in prob.inequalities().iter().enumerate() {
        if !implicit.contains(&i) {
            ineq_provenance[i] = InequalityFate::Kept {
                index: tilde_ineq.len(),
            };
            tilde_ineq.push(c.clone());
        }
    }

    let tilde = prob.with_linear_system(tilde_ineq.clone(), tilde_eq.clone())?;
    let witness = strict_witness(&tilde, tol)?;
    let system = MfcqSystem {
        tilde_ineq,
        tilde_eq,
        witness,
        ineq_provenance,
        eq_provenance,
    };
    let margin = system.witness_margin(prob);
    if margin <= tol {
        return Err(Error::NumericalFailure(format!(
            "witness margin {margin:e} does not exceed the tolerance"
        )));
    }
    Ok(system)
}

/// maximize `t` subject to `⟨g̃_i, x⟩ + t ≤ ã_i`, `⟨h̃_j, x⟩ = b̃_j`, `t ≤ 1`.
fn strict_witness(tilde: &Problem, tol: f64) -> Result<SimpleFunction> {
    let m = tilde.m();
    let mut lp = polyhedron_lp(tilde, 1);
    for i in 0..tilde.inequalities().len() {
        lp.rows[i].coeffs[m] = 1.0;
    }
    lp.objective[m] = 1.0;
    lp.set_bounds(m, f64::NEG_INFINITY, 1.0);
    let out = lp::solve(&lp, &LpOptions::with_feas_tol(tol))?;
    match out.status {
        LpStatus::Optimal => Ok(out.x[..m].to_vec().into()),
        LpStatus::Infeasible => Err(Error::EmptyPolyhedron),
        other => Err(Error::NumericalFailure(format!(
            "witness LP ended with {other:?}: {}",
            out.message.unwrap_or_default()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ExtBound, MeasureSpace};

    fn one_atom() -> MeasureSpace {
        MeasureSpace::new(vec![1.0]).unwrap()
    }

    #[test]
    fn forced_equality_is_detected() {
        let prob = Problem::builder(one_atom())
            .inequality(vec![1.0], 0.5)
            .inequality(vec![-1.0], -0.5)
            .build()
            .unwrap();
        assert_eq!(detect_implicit_equalities(&prob, 1e-9).unwrap(), vec![0, 1]);

        let sys = build_mfcq_system(&prob, 1e-9).unwrap();
        assert!(sys.tilde_ineq.is_empty());
        assert_eq!(sys.tilde_eq.len(), 1);
        assert_eq!(sys.tilde_eq[0].b, 0.5);
        assert!((sys.witness[0] - 0.5).abs() < 1e-12);
        assert_eq!(sys.ineq_provenance[0], InequalityFate::Converted { index: 0 });
        assert!(matches!(sys.ineq_provenance[1], InequalityFate::Dropped { .. }));
    }

    #[test]
    fn slack_inequality_is_not_implicit() {
        let prob = Problem::builder(one_atom()).inequality(vec![1.0], 1.0).build().unwrap();
        assert!(detect_implicit_equalities(&prob, 1e-9).unwrap().is_empty());
    }

    #[test]
    fn implicitness_ignores_the_box() {
        let m = 2;
        let prob = Problem::builder(MeasureSpace::uniform(m).unwrap())
            .bounds(ExtBound::constant(m, 0.0), ExtBound::unbounded_above(m))
            .inequality(vec![1.0, 1.0], 0.0)
            .build()
            .unwrap();
        assert!(detect_implicit_equalities(&prob, 1e-9).unwrap().is_empty());
    }

    #[test]
    fn empty_polyhedron_is_an_error() {
        let prob = Problem::builder(one_atom())
            .inequality(vec![1.0], 0.0)
            .inequality(vec![-1.0], -1.0)
            .build()
            .unwrap();
        assert_eq!(detect_implicit_equalities(&prob, 1e-9), Err(Error::EmptyPolyhedron));
        assert!(matches!(build_mfcq_system(&prob, 1e-9), Err(Error::EmptyPolyhedron)));
    }

    fn eq(h: Vec<f64>, b: f64) -> LinearEquality {
        LinearEquality { h: h.into(), b }
    }

    #[test]
    fn reduce_scalar_multiple() {
        let red = reduce_equalities(&[eq(vec![1.0, 0.0], 1.0), eq(vec![2.0, 0.0], 2.0)], 1e-10, 1e-9)
            .unwrap();
        assert_eq!(red.kept, vec![0]);
        assert_eq!(red.dropped.len(), 1);
        let (k, c) = red.dropped[0].combination[0];
        assert_eq!(k, 0);
        assert!((c - 2.0).abs() < 1e-12);
        assert!(red.dropped[0].residual < 1e-12);
    }

    #[test]
    fn reduce_detects_inconsistency() {
        let eqs = [eq(vec![1.0, 0.0], 1.0), eq(vec![2.0, 0.0], 3.0)];
        match reduce_equalities(&eqs, 1e-10, 1e-9) {
            Err(Error::InconsistentEqualities { index, certificate, .. }) => {
                assert_eq!(index, 1);
                // yᵀH = 0 and yᵀb < 0.
                let yh: f64 = certificate[0] * 1.0 + certificate[1] * 2.0;
                let yb: f64 = certificate[0] * 1.0 + certificate[1] * 3.0;
                assert!(yh.abs() < 1e-12);
                assert!(yb < 0.0);
            }
            other => panic!("expected inconsistency, got {other:?}"),
        }
    }

    #[test]
    fn reduce_keeps_independent_rows() {
        let red = reduce_equalities(&[eq(vec![1.0, 0.0], 1.0), eq(vec![0.0, 1.0], 1.0)], 1e-10, 1e-9)
            .unwrap();
        assert_eq!(red.kept, vec![0, 1]);
        assert!(red.dropped.is_empty());
    }

    #[test]
    fn dominated_inequality_is_kept_and_system_equivalent() {
        let prob = Problem::builder(one_atom())
            .inequality(vec![1.0], 1.0)
            .inequality(vec![1.0], 2.0)
            .build()
            .unwrap();
        let sys = build_mfcq_system(&prob, 1e-9).unwrap();
        let tilde = sys.to_problem(&prob).unwrap();
        for k in -30..30 {
            let x: SimpleFunction = vec![k as f64 * 0.1].into();
            assert_eq!(
                prob.check_feasible(&x, 1e-9).unwrap().feasible,
                tilde.check_feasible(&x, 1e-9).unwrap().feasible
            );
        }
        assert!(sys.witness_margin(&prob) > 1e-9);
    }

    #[test]
    fn no_constraints_give_the_origin() {
        let prob = Problem::builder(MeasureSpace::uniform(3).unwrap()).build().unwrap();
        let sys = build_mfcq_system(&prob, 1e-9).unwrap();
        assert!(sys.tilde_ineq.is_empty() && sys.tilde_eq.is_empty());
        assert_eq!(sys.witness, SimpleFunction::zeros(3));
    }
}
