//! Slater points: feasible points strictly inside the box.
//!
//! Strictness is measured by the margin of a point, the smallest distance to
//! a finite bound over all atoms, each scaled by `max(1, |x_i|)`. Linear
//! inequalities need not hold strictly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{self, DualVector, LinearProgram, LpOptions, LpStatus, RowKind};
use crate::model::{Exponent, Problem, SimpleFunction};
use crate::serde_ext::ext_float;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlaterStatus {
    Found,
    NotFound,
}

/// Why no Slater point was found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoSlaterReason {
    /// `lower = upper` at this atom.
    DegenerateBounds { atom: usize },
    /// The constraints admit no point at all; Farkas ray of the margin LP.
    Infeasible { farkas: DualVector },
    /// The margin LP is optimal with `t* ≤ tol`; its dual solution certifies
    /// that `t` cannot be increased.
    Pinned { t: f64, duals: DualVector },
}

/// A candidate point together with everything needed to judge it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlaterPoint {
    pub point: SimpleFunction,
    /// `min_i dist(x_i, finite bounds) / max(1, |x_i|)`; `inf` without
    /// finite bounds.
    #[serde(with = "ext_float")]
    pub margin: f64,
    /// `⟨g_i, x⟩ − a_i`.
    pub ineq_residuals: Vec<f64>,
    /// `|⟨h_j, x⟩ − b_j|`.
    pub eq_residuals: Vec<f64>,
    /// `⟨G_i'(x̄), x − x̄⟩` for the active nonlinear constraints.
    pub linearized: Vec<f64>,
}

impl SlaterPoint {
    pub fn evaluate(prob: &Problem, x: &SimpleFunction) -> Result<Self> {
        prob.check_len("point", x)?;
        let space = prob.space();
        Ok(Self {
            point: x.clone(),
            margin: box_margin(prob, x),
            ineq_residuals: prob
                .inequalities()
                .iter()
                .map(|c| space.pairing_unchecked(c.g.values(), x.values()) - c.a)
                .collect(),
            eq_residuals: prob
                .equalities()
                .iter()
                .map(|c| (space.pairing_unchecked(c.h.values(), x.values()) - c.b).abs())
                .collect(),
            linearized: Vec::new(),
        })
    }

    /// Margin above `tol`, linear constraints within `tol`, linearized
    /// constraints strictly negative.
    pub fn passes(&self, tol: f64) -> bool {
        self.margin > tol
            && self.ineq_residuals.iter().all(|&r| r <= tol)
            && self.eq_residuals.iter().all(|&r| r <= tol)
            && self.linearized.iter().all(|&r| r < 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlaterReport {
    pub status: SlaterStatus,
    /// Optimal value of the margin LP (0 when it is infeasible).
    pub t: f64,
    pub witness: Option<SlaterPoint>,
    pub reason: Option<NoSlaterReason>,
    /// Active nonlinear constraints used in the linearized test.
    pub linearized_active: Vec<usize>,
}

impl SlaterReport {
    pub fn found(&self) -> bool {
        self.status == SlaterStatus::Found
    }

    pub fn point(&self) -> Option<&SimpleFunction> {
        self.witness.as_ref().map(|w| &w.point)
    }

    fn not_found(t: f64, reason: NoSlaterReason, linearized_active: Vec<usize>) -> Self {
        Self {
            status: SlaterStatus::NotFound,
            t,
            witness: None,
            reason: Some(reason),
            linearized_active,
        }
    }
}

/// Smallest scaled distance from `x` to a finite bound.
pub fn box_margin(prob: &Problem, x: &SimpleFunction) -> f64 {
    let mut margin = f64::INFINITY;
    for i in 0..prob.m() {
        let scale = x[i].abs().max(1.0);
        let (l, u) = (prob.lower()[i], prob.upper()[i]);
        if l.is_finite() {
            margin = margin.min((x[i] - l) / scale);
        }
        if u.is_finite() {
            margin = margin.min((u - x[i]) / scale);
        }
    }
    margin
}

/// Per-atom weight of `t` in the box rows.
fn margin_weight(l: f64, u: f64) -> f64 {
    if l.is_finite() && u.is_finite() {
        ((u - l) / 2.0).min(1.0)
    } else {
        1.0
    }
}

/// One extra row `⟨d, x⟩ + s·t ≤ rhs` of the margin LP.
struct ExtraRow {
    d: SimpleFunction,
    s: f64,
    rhs: f64,
}

fn margin_lp(prob: &Problem, extra: &[ExtraRow]) -> LinearProgram {
    let m = prob.m();
    let w = prob.space().weights();
    let mut lp = LinearProgram::new(m + 1);
    lp.objective[m] = 1.0;
    lp.set_bounds(m, 0.0, 1.0);
    for i in 0..m {
        let (l, u) = (prob.lower()[i], prob.upper()[i]);
        let c = margin_weight(l, u);
        let mut unit = vec![0.0; m + 1];
        unit[i] = 1.0;
        if l.is_finite() {
            let mut row = unit.clone();
            row[m] = -c;
            lp.add_row(row, RowKind::Ge, l);
        }
        if u.is_finite() {
            let mut row = unit;
            row[m] = c;
            lp.add_row(row, RowKind::Le, u);
        }
    }
    let weighted = |f: &SimpleFunction| -> Vec<f64> {
        let mut row: Vec<f64> = f.iter().zip(w).map(|(v, w)| v * w).collect();
        row.push(0.0);
        row
    };
    for c in prob.inequalities() {
        lp.add_row(weighted(&c.g), RowKind::Le, c.a);
    }
    for c in prob.equalities() {
        lp.add_row(weighted(&c.h), RowKind::Eq, c.b);
    }
    for r in extra {
        let mut row = weighted(&r.d);
        row[m] = r.s;
        lp.add_row(row, RowKind::Le, r.rhs);
    }
    lp
}

fn run_margin_lp(
    prob: &Problem,
    extra: &[ExtraRow],
    tol: f64,
    linearized_active: Vec<usize>,
    xbar: Option<&SimpleFunction>,
) -> Result<SlaterReport> {
    if let Some(atom) = (0..prob.m()).find(|&i| prob.lower()[i] == prob.upper()[i]) {
        return Ok(SlaterReport::not_found(
            0.0,
            NoSlaterReason::DegenerateBounds { atom },
            linearized_active,
        ));
    }
    let lp = margin_lp(prob, extra);
    let out = lp::solve(&lp, &LpOptions::with_feas_tol(tol))?;
    match out.status {
        LpStatus::Optimal if out.objective > tol => {
            let m = prob.m();
            let x: SimpleFunction = out.x[..m].to_vec().into();
            let mut witness = SlaterPoint::evaluate(prob, &x)?;
            if let Some(xbar) = xbar {
                let step = x.axpy(-1.0, xbar);
                witness.linearized = extra
                    .iter()
                    .map(|r| prob.space().pairing_unchecked(r.d.values(), step.values()))
                    .collect();
            }
            if !witness.passes(tol) {
                return Err(Error::NumericalFailure(format!(
                    "margin LP reported t = {:e} but the point fails verification (margin {:e})",
                    out.objective, witness.margin
                )));
            }
            Ok(SlaterReport {
                status: SlaterStatus::Found,
                t: out.objective,
                witness: Some(witness),
                reason: None,
                linearized_active,
            })
        }
        LpStatus::Optimal => Ok(SlaterReport::not_found(
            out.objective,
            NoSlaterReason::Pinned {
                t: out.objective,
                duals: out.duals.expect("optimal LP carries duals"),
            },
            linearized_active,
        )),
        LpStatus::Infeasible => Ok(SlaterReport::not_found(
            0.0,
            NoSlaterReason::Infeasible {
                farkas: out.farkas.expect("infeasible LP carries a Farkas ray"),
            },
            linearized_active,
        )),
        LpStatus::Unbounded | LpStatus::NumericalFailure => Err(Error::NumericalFailure(
            out.message.unwrap_or_else(|| format!("margin LP ended with {:?}", out.status)),
        )),
    }
}

/// Decide whether a Slater point exists by maximizing the margin `t`:
/// `lower_i + t c_i ≤ x_i ≤ upper_i − t c_i`, linear constraints, `0 ≤ t ≤ 1`,
/// with `c_i = min(1, (upper_i − lower_i)/2)` (or 1 if a bound is infinite).
///
/// Nonlinear constraints are ignored.
pub fn find_slater(prob: &Problem, tol: f64) -> Result<SlaterReport> {
    run_margin_lp(prob, &[], tol, Vec::new(), None)
}

/// Linearized Slater test at a feasible `x̄`: the margin LP plus
/// `⟨G_i'(x̄), x − x̄⟩ + t s_i ≤ 0` for every active nonlinear constraint,
/// `s_i = max(1, ‖G_i'(x̄)‖_{p'})`.
pub fn find_linearized_slater(prob: &Problem, xbar: &SimpleFunction, tol: f64) -> Result<SlaterReport> {
    let part = prob.regions(xbar, tol)?;
    let p_conj: Exponent = prob.exponent().conjugate();
    let extra: Vec<ExtraRow> = part
        .nl_active
        .iter()
        .map(|&i| {
            let d = prob.nonlinear()[i].gradient(prob.space(), xbar);
            let s = prob.space().lp_norm_unchecked(d.values(), p_conj).max(1.0);
            let rhs = prob.space().pairing_unchecked(d.values(), xbar.values());
            ExtraRow { d, s, rhs }
        })
        .collect();
    run_margin_lp(&prob.linear_part(), &extra, tol, part.nl_active, Some(xbar))
}

/// Push a point of `K` strictly inside the box: atoms on the lower bound move
/// up by `max(w_i, gap_i/2)`, atoms on the upper bound move down by the same
/// rule, where `gap_i` is the distance to the opposite bound. The step is
/// capped at `gap_i/2` when that bound is finite and is `w_i` when it is
/// infinite. Activity is exact equality with the bound. `w` defaults to 1.
pub fn density_construction(
    prob: &Problem,
    xbar: &SimpleFunction,
    w: Option<&SimpleFunction>,
) -> Result<SimpleFunction> {
    prob.check_len("point", xbar)?;
    let ones = SimpleFunction::constant(prob.m(), 1.0);
    let w = w.unwrap_or(&ones);
    prob.check_len("weight function", w)?;
    if let Some(i) = (0..prob.m()).find(|&i| !(w[i] > 0.0)) {
        return Err(Error::Precondition(format!("w must be positive, w[{i}] = {}", w[i])));
    }
    let mut out = xbar.clone();
    for i in 0..prob.m() {
        let (l, u, x) = (prob.lower()[i], prob.upper()[i], xbar[i]);
        if l == u {
            return Err(Error::DegenerateBounds { atom: i });
        }
        if !(l <= x && x <= u) {
            return Err(Error::NotInBox { atom: i });
        }
        let step = |gap: f64| {
            if gap.is_finite() {
                w[i].max(gap / 2.0).min(gap / 2.0)
            } else {
                w[i]
            }
        };
        if x == l {
            out[i] = x + step(u - x);
        } else if x == u {
            out[i] = x - step(x - l);
        }
        if !(l < out[i] && out[i] < u) {
            return Err(Error::NumericalFailure(format!(
                "atom {i}: step from {x} does not leave the bound in floating point"
            )));
        }
    }
    Ok(out)
}

/// Result of [`combine_slater`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Combination {
    pub point: SimpleFunction,
    pub epsilon: f64,
    pub check: SlaterPoint,
}

fn strict_ok(check: &SlaterPoint, strict: &[usize], tol: f64) -> bool {
    check.passes(tol) && strict.iter().all(|&i| check.ineq_residuals[i] < -tol)
}

/// `(1 − ε) x̊ + ε x̃` for the largest `ε ∈ {2^-1, …, 2^-40}` that is a Slater
/// point with the inequalities in `strict` holding strictly.
///
/// `x̊` must satisfy the box, the equalities, the inequalities outside
/// `strict` and those in `strict` with slack above `tol`; `x̃` must lie
/// strictly inside the box and satisfy all constraints outside `strict`.
pub fn combine_slater(
    prob: &Problem,
    ring_x: &SimpleFunction,
    tilde_x: &SimpleFunction,
    strict: &[usize],
    tol: f64,
) -> Result<Combination> {
    if let Some(&i) = strict.iter().find(|&&i| i >= prob.inequalities().len()) {
        return Err(Error::Precondition(format!("inequality index {i} out of range")));
    }
    let ring = SlaterPoint::evaluate(prob, ring_x)?;
    if !prob.in_box(ring_x, tol) {
        return Err(Error::Precondition("x̊ violates the box".into()));
    }
    if let Some(j) = ring.eq_residuals.iter().position(|&r| r > tol) {
        return Err(Error::Precondition(format!("x̊ violates equality {j}")));
    }
    for (i, &r) in ring.ineq_residuals.iter().enumerate() {
        let bad = if strict.contains(&i) { r >= -tol } else { r > tol };
        if bad {
            return Err(Error::Precondition(format!("x̊ fails inequality {i} (residual {r:e})")));
        }
    }
    let tilde = SlaterPoint::evaluate(prob, tilde_x)?;
    if !(tilde.margin > 0.0) {
        return Err(Error::Precondition("x̃ is not strictly inside the box".into()));
    }
    if let Some(j) = tilde.eq_residuals.iter().position(|&r| r > tol) {
        return Err(Error::Precondition(format!("x̃ violates equality {j}")));
    }
    if let Some(i) = (0..prob.inequalities().len())
        .find(|i| !strict.contains(i) && tilde.ineq_residuals[*i] > tol)
    {
        return Err(Error::Precondition(format!("x̃ violates inequality {i}")));
    }

    let mut last = None;
    for k in 1..=40 {
        let eps = 0.5f64.powi(k);
        let x = ring_x.scale(1.0 - eps).axpy(eps, tilde_x);
        let check = SlaterPoint::evaluate(prob, &x)?;
        if strict_ok(&check, strict, tol) {
            return Ok(Combination {
                point: x,
                epsilon: eps,
                check,
            });
        }
        last = Some(check);
    }
    let last = last.expect("at least one step");
    let worst_strict = strict
        .iter()
        .map(|&i| last.ineq_residuals[i])
        .fold(f64::NEG_INFINITY, f64::max);
    Err(Error::ConstructionFailed(format!(
        "no ε down to 2^-40 works; at 2^-40 the margin is {:e} and the worst strict residual is {:e}",
        last.margin, worst_strict
    )))
}
