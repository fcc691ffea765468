//! Dense simplex kernel with dual solutions and Farkas certificates.
//!
//! Problems are stated as
//!
//! ```text
//!     maximize    cᵀx
//!     subject to  a_iᵀx  (≤ | = | ≥)  b_i
//!                 l ≤ x ≤ u            (entries of l, u may be infinite)
//! ```
//!
//! Internally every relation (including finite variable bounds) becomes a
//! `≤` row with a nonnegative slack and the structural variables are free.
//! The solver works on a condensed (Tucker) tableau whose columns are the
//! nonbasic variables, so the work per pivot is `rows × (vars + 1)` no matter
//! how many rows there are. Free variables are pivoted into the basis up
//! front; phase 1 uses a single artificial column; both phases use Bland's
//! rule, which makes every solve deterministic.
//!
//! Every outcome is checked against the original data before it is returned.
//! A certificate that does not pass its residual checks is reported as
//! [`LpStatus::NumericalFailure`] and never as a result.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowKind {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub coeffs: Vec<f64>,
    pub kind: RowKind,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    /// Maximized.
    pub objective: Vec<f64>,
    pub rows: Vec<LpRow>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    /// `n` free variables, zero objective, no rows.
    pub fn new(n: usize) -> Self {
        Self {
            objective: vec![0.0; n],
            rows: Vec::new(),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn maximize(mut self, objective: Vec<f64>) -> Self {
        self.objective = objective;
        self
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, kind: RowKind, rhs: f64) {
        self.rows.push(LpRow { coeffs, kind, rhs });
    }

    pub fn with_row(mut self, coeffs: Vec<f64>, kind: RowKind, rhs: f64) -> Self {
        self.add_row(coeffs, kind, rhs);
        self
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    pub fn nonnegative(mut self) -> Self {
        self.lower.iter_mut().for_each(|l| *l = 0.0);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let mismatch = |what: &str, found| Error::DimensionMismatch {
            what: what.to_string(),
            expected: n,
            found,
        };
        if self.lower.len() != n {
            return Err(mismatch("lp lower bounds", self.lower.len()));
        }
        if self.upper.len() != n {
            return Err(mismatch("lp upper bounds", self.upper.len()));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::NotFinite("lp objective".into()));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(mismatch(&format!("lp row {i}"), row.coeffs.len()));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(Error::NotFinite(format!("lp row {i}")));
            }
        }
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(Error::InvalidBound {
                    index: j,
                    reason: format!("lp bounds [{l}, {u}]"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpOptions {
    pub feas_tol: f64,
    pub pivot_tol: f64,
    pub max_iter: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-9,
            pivot_tol: 1e-11,
            max_iter: 100_000,
        }
    }
}

impl LpOptions {
    pub fn with_feas_tol(tol: f64) -> Self {
        Self {
            feas_tol: tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

/// Multipliers for the rows and for the finite variable bounds.
///
/// Signs: `rows[i] ≥ 0` for `≤` rows, `≤ 0` for `≥` rows, free for `=` rows;
/// `lower`, `upper` are nonnegative and vanish on infinite bounds. For an
/// optimal dual, `c = Aᵀ rows + upper − lower`. For a Farkas ray,
/// `Aᵀ rows + upper − lower = 0` and [`DualVector::rhs_value`] is negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualVector {
    pub rows: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DualVector {
    fn zeros(rows: usize, n: usize) -> Self {
        Self {
            rows: vec![0.0; rows],
            lower: vec![0.0; n],
            upper: vec![0.0; n],
        }
    }

    /// `Aᵀ rows + upper − lower`.
    pub fn combination(&self, lp: &LinearProgram) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .upper
            .iter()
            .zip(&self.lower)
            .map(|(u, l)| u - l)
            .collect();
        for (y, row) in self.rows.iter().zip(&lp.rows) {
            if *y != 0.0 {
                for (o, a) in out.iter_mut().zip(&row.coeffs) {
                    *o += y * a;
                }
            }
        }
        out
    }

    /// `bᵀ rows + uᵀ upper − lᵀ lower` over the finite bounds.
    pub fn rhs_value(&self, lp: &LinearProgram) -> f64 {
        let mut v: f64 = self.rows.iter().zip(&lp.rows).map(|(y, r)| y * r.rhs).sum();
        for j in 0..lp.num_vars() {
            if self.upper[j] != 0.0 {
                v += self.upper[j] * lp.upper[j];
            }
            if self.lower[j] != 0.0 {
                v -= self.lower[j] * lp.lower[j];
            }
        }
        v
    }

    pub fn max_norm(&self) -> f64 {
        self.rows
            .iter()
            .chain(&self.lower)
            .chain(&self.upper)
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    fn scale(&mut self, factor: f64) {
        self.rows
            .iter_mut()
            .chain(self.lower.iter_mut())
            .chain(self.upper.iter_mut())
            .for_each(|v| *v *= factor);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpOutcome {
    pub status: LpStatus,
    /// Optimal point, or a feasible point when unbounded.
    pub x: Vec<f64>,
    pub objective: f64,
    pub duals: Option<DualVector>,
    /// Present iff the status is `Infeasible`; normalized to max-norm 1.
    pub farkas: Option<DualVector>,
    /// Improving ray when unbounded; normalized to max-norm 1.
    pub ray: Option<Vec<f64>>,
    pub iterations: usize,
    pub message: Option<String>,
}

impl LpOutcome {
    fn failure(n: usize, iterations: usize, message: String) -> Self {
        Self {
            status: LpStatus::NumericalFailure,
            x: vec![0.0; n],
            objective: f64::NAN,
            duals: None,
            farkas: None,
            ray: None,
            iterations,
            message: Some(message),
        }
    }
}

/// Result of a pure feasibility query.
#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible(Vec<f64>),
    Infeasible(DualVector),
    NumericalFailure(String),
}

/// Find a point of `{x : rows, bounds}` or a Farkas ray proving there is none.
/// The objective of `lp` is ignored.
pub fn feasibility(lp: &LinearProgram, opts: &LpOptions) -> Result<Feasibility> {
    let mut zero = lp.clone();
    zero.objective.iter_mut().for_each(|c| *c = 0.0);
    let out = solve(&zero, opts)?;
    Ok(match out.status {
        LpStatus::Optimal => Feasibility::Feasible(out.x),
        LpStatus::Infeasible => Feasibility::Infeasible(out.farkas.expect("farkas ray")),
        // A zero objective cannot be unbounded.
        LpStatus::Unbounded | LpStatus::NumericalFailure => Feasibility::NumericalFailure(
            out.message.unwrap_or_else(|| "unexpected unbounded status".into()),
        ),
    })
}

#[derive(Debug, Clone, Copy)]
enum Origin {
    Row(usize, f64),
    Lower(usize),
    Upper(usize),
}

struct Tableau {
    n: usize,
    /// Basic variable of each tableau row.
    row_var: Vec<usize>,
    /// Nonbasic variable of each column (entry `c + 1` of every row).
    col_var: Vec<usize>,
    /// Row `r`: `basic = t[r][0] + Σ_c t[r][c+1] · nonbasic_c`.
    t: Vec<Vec<f64>>,
    obj: Vec<f64>,
    aux: Option<Vec<f64>>,
    /// Columns holding a free structural variable that could not be pivoted
    /// into the basis: they touch no constraint.
    dead: Vec<bool>,
    pivot_tol: f64,
    iterations: usize,
}

enum Step {
    Optimal,
    Unbounded { col: usize, direction: f64 },
    IterationLimit,
}

impl Tableau {
    fn is_slack(&self, var: usize) -> bool {
        var >= self.n
    }

    fn pivot(&mut self, r: usize, c: usize) {
        self.iterations += 1;
        let k = c + 1;
        let p = self.t[r][k];
        let mut new_row: Vec<f64> = self.t[r].iter().map(|v| -v / p).collect();
        new_row[k] = 1.0 / p;
        let update = |row: &mut Vec<f64>| {
            let f = row[k];
            if f != 0.0 {
                for (v, nr) in row.iter_mut().zip(&new_row) {
                    *v += f * nr;
                }
                row[k] = f * new_row[k];
            }
        };
        for (i, row) in self.t.iter_mut().enumerate() {
            if i != r {
                update(row);
            }
        }
        update(&mut self.obj);
        if let Some(aux) = self.aux.as_mut() {
            update(aux);
        }
        self.t[r] = new_row;
        std::mem::swap(&mut self.row_var[r], &mut self.col_var[c]);
    }

    /// Bland's rule on the given objective row (maximization).
    fn run(&mut self, use_aux: bool, opt_tol: f64, max_iter: usize) -> Step {
        loop {
            if self.iterations >= max_iter {
                return Step::IterationLimit;
            }
            let obj = if use_aux {
                self.aux.as_ref().unwrap()
            } else {
                &self.obj
            };
            for c in 0..self.col_var.len() {
                if self.dead[c] && obj[c + 1].abs() > opt_tol {
                    return Step::Unbounded {
                        col: c,
                        direction: obj[c + 1].signum(),
                    };
                }
            }
            let entering = (0..self.col_var.len())
                .filter(|&c| !self.dead[c] && obj[c + 1] > opt_tol)
                .min_by_key(|&c| self.col_var[c]);
            let Some(c) = entering else {
                return Step::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.t.len() {
                if !self.is_slack(self.row_var[r]) {
                    continue;
                }
                let a = self.t[r][c + 1];
                if a >= -self.pivot_tol {
                    continue;
                }
                let ratio = self.t[r][0].max(0.0) / -a;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((br, bratio)) => {
                        let tie = (ratio - bratio).abs() <= 1e-12 * (1.0 + bratio.abs());
                        if (!tie && ratio < bratio) || (tie && self.row_var[r] < self.row_var[br])
                        {
                            Some((r, ratio))
                        } else {
                            Some((br, bratio))
                        }
                    }
                };
            }
            match leave {
                Some((r, _)) => self.pivot(r, c),
                None => {
                    return Step::Unbounded {
                        col: c,
                        direction: 1.0,
                    }
                }
            }
        }
    }

    fn value_of(&self, var: usize) -> f64 {
        match self.row_var.iter().position(|&v| v == var) {
            Some(r) => self.t[r][0],
            None => 0.0,
        }
    }

    fn structural_point(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for (r, &v) in self.row_var.iter().enumerate() {
            if v < self.n {
                x[v] = self.t[r][0];
            }
        }
        x
    }

    /// Nonnegative multipliers of the internal `≤` rows read off an objective
    /// row at optimality.
    fn row_multipliers(&self, obj: &[f64], num_rows: usize) -> Vec<f64> {
        let mut w = vec![0.0; num_rows];
        for (c, &var) in self.col_var.iter().enumerate() {
            if var >= self.n && var < self.n + num_rows {
                w[var - self.n] = (-obj[c + 1]).max(0.0);
            }
        }
        w
    }
}

/// Solve a linear program. Errors only on malformed input; numerical trouble
/// is reported through [`LpStatus::NumericalFailure`].
pub fn solve(lp: &LinearProgram, opts: &LpOptions) -> Result<LpOutcome> {
    lp.validate()?;
    let n = lp.num_vars();

    let mut rows: Vec<(Vec<f64>, f64, Origin)> = Vec::new();
    for (i, row) in lp.rows.iter().enumerate() {
        let neg = || row.coeffs.iter().map(|a| -a).collect::<Vec<_>>();
        match row.kind {
            RowKind::Le => rows.push((row.coeffs.clone(), row.rhs, Origin::Row(i, 1.0))),
            RowKind::Ge => rows.push((neg(), -row.rhs, Origin::Row(i, -1.0))),
            RowKind::Eq => {
                rows.push((row.coeffs.clone(), row.rhs, Origin::Row(i, 1.0)));
                rows.push((neg(), -row.rhs, Origin::Row(i, -1.0)));
            }
        }
    }
    for j in 0..n {
        if lp.upper[j].is_finite() {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            rows.push((e, lp.upper[j], Origin::Upper(j)));
        }
        if lp.lower[j].is_finite() {
            let mut e = vec![0.0; n];
            e[j] = -1.0;
            rows.push((e, -lp.lower[j], Origin::Lower(j)));
        }
    }
    let m = rows.len();

    let mut obj = vec![0.0; n + 1];
    obj[1..].copy_from_slice(&lp.objective);
    let mut tab = Tableau {
        n,
        row_var: (n..n + m).collect(),
        col_var: (0..n).collect(),
        t: rows
            .iter()
            .map(|(a, b, _)| {
                let mut r = Vec::with_capacity(n + 2);
                r.push(*b);
                r.extend(a.iter().map(|v| -v));
                r
            })
            .collect(),
        obj,
        aux: None,
        dead: vec![false; n],
        pivot_tol: opts.pivot_tol,
        iterations: 0,
    };

    // Phase 0: move free structural variables into the basis.
    for c in 0..n {
        let mut best: Option<(usize, f64)> = None;
        for r in 0..tab.t.len() {
            if !tab.is_slack(tab.row_var[r]) {
                continue;
            }
            let a = tab.t[r][c + 1].abs();
            if a > opts.pivot_tol && best.is_none_or(|(_, b)| a > b) {
                best = Some((r, a));
            }
        }
        match best {
            Some((r, _)) => tab.pivot(r, c),
            None => tab.dead[c] = true,
        }
    }

    // Phase 1.
    let infeasible_start = tab
        .t
        .iter()
        .zip(&tab.row_var)
        .any(|(row, &v)| v >= n && row[0] < -opts.feas_tol);
    if infeasible_start {
        let art = n + m;
        for (row, &v) in tab.t.iter_mut().zip(&tab.row_var) {
            row.push(if v >= n { 1.0 } else { 0.0 });
        }
        tab.obj.push(0.0);
        let mut aux = vec![0.0; tab.col_var.len() + 2];
        *aux.last_mut().unwrap() = -1.0;
        tab.aux = Some(aux);
        tab.col_var.push(art);
        tab.dead.push(false);
        let art_col = tab.col_var.len() - 1;

        let r0 = (0..tab.t.len())
            .filter(|&r| tab.row_var[r] >= n)
            .min_by(|&a, &b| {
                tab.t[a][0]
                    .partial_cmp(&tab.t[b][0])
                    .unwrap()
                    .then(tab.row_var[a].cmp(&tab.row_var[b]))
            })
            .unwrap();
        tab.pivot(r0, art_col);

        match tab.run(true, opts.feas_tol, opts.max_iter) {
            Step::Optimal => {}
            Step::Unbounded { .. } => {
                return Ok(LpOutcome::failure(n, tab.iterations, "phase 1 reported unbounded".into()))
            }
            Step::IterationLimit => {
                return Ok(LpOutcome::failure(n, tab.iterations, "iteration limit in phase 1".into()))
            }
        }
        let art_value = tab.value_of(art);
        if art_value > opts.feas_tol {
            let w = tab.row_multipliers(tab.aux.as_ref().unwrap(), m);
            let mut farkas = map_multipliers(&w, &rows, lp.rows.len(), n);
            let norm = farkas.max_norm();
            if norm == 0.0 {
                return Ok(LpOutcome::failure(n, tab.iterations, "vanishing Farkas ray".into()));
            }
            farkas.scale(1.0 / norm);
            let out = LpOutcome {
                status: LpStatus::Infeasible,
                x: tab.structural_point(),
                objective: f64::NAN,
                duals: None,
                farkas: Some(farkas),
                ray: None,
                iterations: tab.iterations,
                message: None,
            };
            return Ok(checked(lp, out, opts));
        }

        // Drive the artificial variable out of the basis and drop its column.
        if let Some(r) = tab.row_var.iter().position(|&v| v == art) {
            let c = (0..tab.col_var.len())
                .filter(|&c| !tab.dead[c] && tab.t[r][c + 1].abs() > opts.pivot_tol)
                .max_by(|&a, &b| tab.t[r][a + 1].abs().partial_cmp(&tab.t[r][b + 1].abs()).unwrap());
            match c {
                Some(c) => tab.pivot(r, c),
                None => {
                    tab.t.remove(r);
                    tab.row_var.remove(r);
                }
            }
        }
        if let Some(c) = tab.col_var.iter().position(|&v| v == art) {
            for row in tab.t.iter_mut() {
                row.remove(c + 1);
            }
            tab.obj.remove(c + 1);
            tab.col_var.remove(c);
            tab.dead.remove(c);
        }
        tab.aux = None;
    }

    // Phase 2.
    match tab.run(false, opts.feas_tol, opts.max_iter) {
        Step::Optimal => {
            let x = tab.structural_point();
            let w = tab.row_multipliers(&tab.obj, m);
            let duals = map_multipliers(&w, &rows, lp.rows.len(), n);
            let objective = dot(&lp.objective, &x);
            let out = LpOutcome {
                status: LpStatus::Optimal,
                x,
                objective,
                duals: Some(duals),
                farkas: None,
                ray: None,
                iterations: tab.iterations,
                message: None,
            };
            Ok(checked(lp, out, opts))
        }
        Step::Unbounded { col, direction } => {
            let mut ray = vec![0.0; n];
            let entering = tab.col_var[col];
            if entering < n {
                ray[entering] = direction;
            }
            for (r, &v) in tab.row_var.iter().enumerate() {
                if v < n {
                    ray[v] = direction * tab.t[r][col + 1];
                }
            }
            let norm = ray.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if norm == 0.0 {
                return Ok(LpOutcome::failure(n, tab.iterations, "vanishing improving ray".into()));
            }
            ray.iter_mut().for_each(|v| *v /= norm);
            let x = tab.structural_point();
            let out = LpOutcome {
                status: LpStatus::Unbounded,
                objective: f64::INFINITY,
                x,
                duals: None,
                farkas: None,
                ray: Some(ray),
                iterations: tab.iterations,
                message: None,
            };
            Ok(checked(lp, out, opts))
        }
        Step::IterationLimit => Ok(LpOutcome::failure(
            n,
            tab.iterations,
            "iteration limit in phase 2".into(),
        )),
    }
}

fn map_multipliers(
    w: &[f64],
    rows: &[(Vec<f64>, f64, Origin)],
    num_rows: usize,
    n: usize,
) -> DualVector {
    let mut d = DualVector::zeros(num_rows, n);
    for (wr, (_, _, origin)) in w.iter().zip(rows) {
        match *origin {
            Origin::Row(i, sign) => d.rows[i] += sign * wr,
            Origin::Lower(j) => d.lower[j] += wr,
            Origin::Upper(j) => d.upper[j] += wr,
        }
    }
    d
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn checked(lp: &LinearProgram, mut out: LpOutcome, opts: &LpOptions) -> LpOutcome {
    if let Err(msg) = verify_outcome(lp, &out, opts.feas_tol) {
        out.status = LpStatus::NumericalFailure;
        out.message = Some(msg);
        out.duals = None;
        out.farkas = None;
        out.ray = None;
    }
    out
}

/// Residual checks for every status. Tolerances are relative to the size of
/// the terms involved.
pub fn verify_outcome(lp: &LinearProgram, out: &LpOutcome, tol: f64) -> Result<(), String> {
    let n = lp.num_vars();
    let slack_tol = |terms: f64| 10.0 * tol * (1.0 + terms);
    let row_activity = |row: &LpRow, x: &[f64]| -> (f64, f64) {
        let v = dot(&row.coeffs, x);
        let mag: f64 = row.coeffs.iter().zip(x).map(|(a, x)| (a * x).abs()).sum();
        (v, mag + row.rhs.abs())
    };
    let check_sign = |d: &DualVector| -> Result<(), String> {
        for (i, (y, row)) in d.rows.iter().zip(&lp.rows).enumerate() {
            let ok = match row.kind {
                RowKind::Le => *y >= 0.0,
                RowKind::Ge => *y <= 0.0,
                RowKind::Eq => true,
            };
            if !ok {
                return Err(format!("multiplier of row {i} has the wrong sign"));
            }
        }
        for j in 0..n {
            if d.lower[j] < 0.0 || d.upper[j] < 0.0 {
                return Err(format!("bound multiplier of variable {j} is negative"));
            }
            if (d.lower[j] != 0.0 && !lp.lower[j].is_finite())
                || (d.upper[j] != 0.0 && !lp.upper[j].is_finite())
            {
                return Err(format!("multiplier on an infinite bound of variable {j}"));
            }
        }
        Ok(())
    };
    let combination_scale = |d: &DualVector| -> Vec<f64> {
        let mut s: Vec<f64> = d.upper.iter().zip(&d.lower).map(|(u, l)| u + l).collect();
        for (y, row) in d.rows.iter().zip(&lp.rows) {
            for (s, a) in s.iter_mut().zip(&row.coeffs) {
                *s += (y * a).abs();
            }
        }
        s
    };

    match out.status {
        LpStatus::NumericalFailure => Ok(()),
        LpStatus::Optimal => {
            let x = &out.x;
            let mut compl = 0.0;
            let mut compl_scale = 0.0;
            let duals = out.duals.as_ref().ok_or("optimal outcome without duals")?;
            check_sign(duals)?;
            for (i, row) in lp.rows.iter().enumerate() {
                let (v, mag) = row_activity(row, x);
                let viol = match row.kind {
                    RowKind::Le => v - row.rhs,
                    RowKind::Ge => row.rhs - v,
                    RowKind::Eq => (v - row.rhs).abs(),
                };
                if viol > slack_tol(mag) {
                    return Err(format!("row {i} violated by {viol:e}"));
                }
                compl += (duals.rows[i] * (row.rhs - v)).abs();
                compl_scale += duals.rows[i].abs() * mag;
            }
            for j in 0..n {
                if x[j] < lp.lower[j] - slack_tol(lp.lower[j].abs())
                    || x[j] > lp.upper[j] + slack_tol(lp.upper[j].abs())
                {
                    return Err(format!("variable {j} outside its bounds"));
                }
                if lp.lower[j].is_finite() {
                    compl += duals.lower[j] * (x[j] - lp.lower[j]).abs();
                    compl_scale += duals.lower[j] * (x[j].abs() + lp.lower[j].abs());
                }
                if lp.upper[j].is_finite() {
                    compl += duals.upper[j] * (lp.upper[j] - x[j]).abs();
                    compl_scale += duals.upper[j] * (x[j].abs() + lp.upper[j].abs());
                }
            }
            let comb = duals.combination(lp);
            let scale = combination_scale(duals);
            for j in 0..n {
                let r = (lp.objective[j] - comb[j]).abs();
                if r > slack_tol(scale[j] + lp.objective[j].abs()) {
                    return Err(format!("dual residual {r:e} in column {j}"));
                }
            }
            let dual_value = duals.rhs_value(lp);
            let gap = (out.objective - dual_value).abs();
            if gap > slack_tol(compl_scale + out.objective.abs()) {
                return Err(format!("duality gap {gap:e}"));
            }
            if compl > slack_tol(compl_scale) {
                return Err(format!("complementary slackness residual {compl:e}"));
            }
            Ok(())
        }
        LpStatus::Infeasible => {
            let ray = out.farkas.as_ref().ok_or("infeasible outcome without Farkas ray")?;
            check_sign(ray)?;
            let comb = ray.combination(lp);
            let scale = combination_scale(ray);
            for j in 0..n {
                if comb[j].abs() > slack_tol(scale[j]) {
                    return Err(format!("Farkas combination nonzero in column {j}"));
                }
            }
            if ray.rhs_value(lp) >= -tol {
                return Err(format!("Farkas value {:e} is not negative", ray.rhs_value(lp)));
            }
            Ok(())
        }
        LpStatus::Unbounded => {
            let d = out.ray.as_ref().ok_or("unbounded outcome without ray")?;
            for (i, row) in lp.rows.iter().enumerate() {
                let v = dot(&row.coeffs, d);
                let mag: f64 = row.coeffs.iter().map(|a| a.abs()).sum();
                let viol = match row.kind {
                    RowKind::Le => v,
                    RowKind::Ge => -v,
                    RowKind::Eq => v.abs(),
                };
                if viol > slack_tol(mag) {
                    return Err(format!("ray leaves row {i}"));
                }
            }
            for j in 0..n {
                if (lp.lower[j].is_finite() && d[j] < -slack_tol(0.0))
                    || (lp.upper[j].is_finite() && d[j] > slack_tol(0.0))
                {
                    return Err(format!("ray leaves the bounds of variable {j}"));
                }
            }
            if dot(&lp.objective, d) <= tol {
                return Err("ray does not improve the objective".into());
            }
            point_feasible(lp, &out.x, tol)
        }
    }
}

fn point_feasible(lp: &LinearProgram, x: &[f64], tol: f64) -> Result<(), String> {
    for (i, row) in lp.rows.iter().enumerate() {
        let v = dot(&row.coeffs, x);
        let mag: f64 = row.coeffs.iter().zip(x).map(|(a, x)| (a * x).abs()).sum::<f64>() + row.rhs.abs();
        let viol = match row.kind {
            RowKind::Le => v - row.rhs,
            RowKind::Ge => row.rhs - v,
            RowKind::Eq => (v - row.rhs).abs(),
        };
        if viol > 10.0 * tol * (1.0 + mag) {
            return Err(format!("point violates row {i}"));
        }
    }
    for j in 0..lp.num_vars() {
        if x[j] < lp.lower[j] - 10.0 * tol * (1.0 + lp.lower[j].abs())
            || x[j] > lp.upper[j] + 10.0 * tol * (1.0 + lp.upper[j].abs())
        {
            return Err(format!("point violates the bounds of variable {j}"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> LpOptions {
        LpOptions::default()
    }

    #[test]
    fn box_maximum() {
        let lp = LinearProgram::new(2)
            .maximize(vec![1.0, 1.0])
            .with_row(vec![1.0, 0.0], RowKind::Le, 1.0)
            .with_row(vec![0.0, 1.0], RowKind::Le, 1.0)
            .nonnegative();
        let out = solve(&lp, &opts()).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.objective - 2.0).abs() < 1e-12);
        assert!((out.x[0] - 1.0).abs() < 1e-12 && (out.x[1] - 1.0).abs() < 1e-12);
        let duals = out.duals.unwrap();
        assert!((duals.rows[0] - 1.0).abs() < 1e-12 && (duals.rows[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn contradictory_rows_give_farkas_ray() {
        let lp = LinearProgram::new(1)
            .with_row(vec![1.0], RowKind::Le, -1.0)
            .with_row(vec![-1.0], RowKind::Le, 0.0);
        let out = solve(&lp, &opts()).unwrap();
        assert_eq!(out.status, LpStatus::Infeasible);
        let y = out.farkas.unwrap();
        assert_eq!(y.rows, vec![1.0, 1.0]);
        assert!(y.combination(&lp)[0].abs() < 1e-12);
        assert_eq!(y.rhs_value(&lp), -1.0);
    }

    #[test]
    fn unbounded_ray() {
        let lp = LinearProgram::new(1).maximize(vec![1.0]).nonnegative();
        let out = solve(&lp, &opts()).unwrap();
        assert_eq!(out.status, LpStatus::Unbounded);
        assert_eq!(out.ray.unwrap(), vec![1.0]);
    }

    #[test]
    fn free_variable_without_rows_is_unbounded_both_ways() {
        let out = solve(&LinearProgram::new(1).maximize(vec![-2.0]), &opts()).unwrap();
        assert_eq!(out.status, LpStatus::Unbounded);
        assert_eq!(out.ray.unwrap(), vec![-1.0]);
    }

    #[test]
    fn feasibility_examples() {
        let lp = LinearProgram::new(1).with_row(vec![1.0], RowKind::Eq, 1.0);
        assert_eq!(feasibility(&lp, &opts()).unwrap(), Feasibility::Feasible(vec![1.0]));

        let lp = LinearProgram::new(1)
            .with_row(vec![1.0], RowKind::Le, 0.0)
            .with_row(vec![1.0], RowKind::Ge, 1.0);
        match feasibility(&lp, &opts()).unwrap() {
            Feasibility::Infeasible(y) => {
                assert!(y.rhs_value(&lp) < -1e-9);
                assert!(y.rows[0] >= 0.0 && y.rows[1] <= 0.0);
            }
            other => panic!("expected a Farkas ray, got {other:?}"),
        }

        assert_eq!(
            feasibility(&LinearProgram::new(1), &opts()).unwrap(),
            Feasibility::Feasible(vec![0.0])
        );
    }

    #[test]
    fn equality_and_bounds() {
        // max x + 2y, x + y = 1, 0 ≤ x ≤ 1, y ≤ 0.25
        let mut lp = LinearProgram::new(2)
            .maximize(vec![1.0, 2.0])
            .with_row(vec![1.0, 1.0], RowKind::Eq, 1.0);
        lp.set_bounds(0, 0.0, 1.0);
        lp.set_bounds(1, f64::NEG_INFINITY, 0.25);
        let out = solve(&lp, &opts()).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.objective - 1.25).abs() < 1e-12);
        let d = out.duals.unwrap();
        assert!((d.rows[0] - 1.0).abs() < 1e-12);
        assert!((d.upper[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_bounds_certificate_uses_bound_multipliers() {
        let mut lp = LinearProgram::new(1).with_row(vec![1.0], RowKind::Ge, 2.0);
        lp.set_bounds(0, 0.0, 1.0);
        let out = solve(&lp, &opts()).unwrap();
        assert_eq!(out.status, LpStatus::Infeasible);
        let y = out.farkas.unwrap();
        assert!(y.upper[0] > 0.0);
        assert!(y.rhs_value(&lp) < 0.0);
    }

    #[test]
    fn malformed_programs_are_rejected() {
        let lp = LinearProgram::new(2).with_row(vec![1.0], RowKind::Le, 0.0);
        assert!(matches!(solve(&lp, &opts()), Err(Error::DimensionMismatch { .. })));
        let lp = LinearProgram::new(1).maximize(vec![f64::NAN]);
        assert!(matches!(solve(&lp, &opts()), Err(Error::NotFinite(_))));
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example, which cycles under the largest-coefficient rule.
        let lp = LinearProgram::new(4)
            .maximize(vec![0.75, -150.0, 0.02, -6.0])
            .with_row(vec![0.25, -60.0, -0.04, 9.0], RowKind::Le, 0.0)
            .with_row(vec![0.5, -90.0, -0.02, 3.0], RowKind::Le, 0.0)
            .with_row(vec![0.0, 0.0, 1.0, 0.0], RowKind::Le, 1.0)
            .nonnegative();
        let out = solve(&lp, &opts()).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.objective - 0.05).abs() < 1e-12);
    }
}
