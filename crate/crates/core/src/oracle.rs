//! Brute-force reference solvers for tiny instances.
//!
//! Nothing in here goes through the simplex kernel. Polyhedra are explored by
//! enumerating subsets of constraints, solving the corresponding equality
//! systems by Gaussian elimination and checking the resulting points. This is
//! exponential and only meant for a handful of variables.

use crate::lp::{LinearProgram, RowKind};
use crate::model::{Activity, Problem, SimpleFunction};

/// A single relation `coeffsᵀx ⋈ rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    pub coeffs: Vec<f64>,
    pub kind: RowKind,
    pub rhs: f64,
}

impl Relation {
    pub fn new(coeffs: Vec<f64>, kind: RowKind, rhs: f64) -> Self {
        Self { coeffs, kind, rhs }
    }

    fn holds(&self, x: &[f64], tol: f64) -> bool {
        let v: f64 = self.coeffs.iter().zip(x).map(|(a, x)| a * x).sum();
        let scale = 1.0 + self.rhs.abs() + self.coeffs.iter().zip(x).map(|(a, x)| (a * x).abs()).sum::<f64>();
        match self.kind {
            RowKind::Le => v <= self.rhs + tol * scale,
            RowKind::Ge => v >= self.rhs - tol * scale,
            RowKind::Eq => (v - self.rhs).abs() <= tol * scale,
        }
    }
}

/// Solve the square system `a x = b` with partial pivoting. `None` if the
/// matrix is numerically singular.
pub fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[r][k] -= f * a[col][k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let s: f64 = (col + 1..n).map(|k| a[col][k] * x[k]).sum();
        x[col] = (b[col] - s) / a[col][col];
    }
    Some(x)
}

/// Minimum-norm solution of `A x = b` for `A` with linearly independent rows,
/// `x = Aᵀ (A Aᵀ)⁻¹ b`. `None` if the rows are dependent.
pub fn min_norm_solution(rows: &[&[f64]], rhs: &[f64], n: usize) -> Option<Vec<f64>> {
    if rows.is_empty() {
        return Some(vec![0.0; n]);
    }
    let k = rows.len();
    let gram: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| rows[i].iter().zip(rows[j]).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    let y = solve_square(gram, rhs.to_vec())?;
    let mut x = vec![0.0; n];
    for (yi, row) in y.iter().zip(rows) {
        for (xj, a) in x.iter_mut().zip(row.iter()) {
            *xj += yi * a;
        }
    }
    // Reject near-dependent selections whose solution does not reproduce b.
    for (row, b) in rows.iter().zip(rhs) {
        let v: f64 = row.iter().zip(&x).map(|(a, x)| a * x).sum();
        if (v - b).abs() > 1e-9 * (1.0 + b.abs()) {
            return None;
        }
    }
    Some(x)
}

fn for_each_subset(len: usize, max_size: usize, mut f: impl FnMut(&[usize]) -> bool) {
    fn rec(
        start: usize,
        len: usize,
        max_size: usize,
        cur: &mut Vec<usize>,
        f: &mut dyn FnMut(&[usize]) -> bool,
    ) -> bool {
        if !f(cur) {
            return false;
        }
        if cur.len() == max_size {
            return true;
        }
        for i in start..len {
            cur.push(i);
            if !rec(i + 1, len, max_size, cur, f) {
                return false;
            }
            cur.pop();
        }
        true
    }
    rec(0, len, max_size, &mut Vec::new(), &mut f);
}

/// Candidate points: the minimum-norm point of every independent subsystem of
/// at most `n` relations held with equality. Every nonempty polyhedron
/// contains one of them (its minimal faces are such affine sets).
pub fn candidate_points(rels: &[Relation], n: usize, tol: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for_each_subset(rels.len(), n.min(rels.len()), |subset| {
        let rows: Vec<&[f64]> = subset.iter().map(|&i| rels[i].coeffs.as_slice()).collect();
        let rhs: Vec<f64> = subset.iter().map(|&i| rels[i].rhs).collect();
        if let Some(x) = min_norm_solution(&rows, &rhs, n) {
            if rels.iter().all(|r| r.holds(&x, tol)) {
                out.push(x);
            }
        }
        true
    });
    out
}

pub fn feasible_point(rels: &[Relation], n: usize, tol: f64) -> Option<Vec<f64>> {
    let mut found = None;
    for_each_subset(rels.len(), n.min(rels.len()), |subset| {
        let rows: Vec<&[f64]> = subset.iter().map(|&i| rels[i].coeffs.as_slice()).collect();
        let rhs: Vec<f64> = subset.iter().map(|&i| rels[i].rhs).collect();
        if let Some(x) = min_norm_solution(&rows, &rhs, n) {
            if rels.iter().all(|r| r.holds(&x, tol)) {
                found = Some(x);
                return false;
            }
        }
        true
    });
    found
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleStatus {
    Optimal(f64),
    Infeasible,
    Unbounded,
}

/// Rows and finite bounds of an LP as plain relations.
pub fn lp_relations(lp: &LinearProgram) -> Vec<Relation> {
    let n = lp.num_vars();
    let mut rels: Vec<Relation> = lp
        .rows
        .iter()
        .map(|r| Relation::new(r.coeffs.clone(), r.kind, r.rhs))
        .collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        if lp.lower[j].is_finite() {
            rels.push(Relation::new(e.clone(), RowKind::Ge, lp.lower[j]));
        }
        if lp.upper[j].is_finite() {
            rels.push(Relation::new(e, RowKind::Le, lp.upper[j]));
        }
    }
    rels
}

/// Vertex-enumeration reference for `maximize cᵀx` over an LP.
pub fn solve_lp(lp: &LinearProgram, tol: f64) -> OracleStatus {
    let n = lp.num_vars();
    let rels = lp_relations(lp);
    let candidates = candidate_points(&rels, n, tol);
    if candidates.is_empty() {
        return OracleStatus::Infeasible;
    }

    // Recession cone intersected with the unit box: a polytope, so its
    // maximum is attained at a vertex defined by n independent relations.
    let mut rec: Vec<Relation> = rels
        .iter()
        .map(|r| Relation::new(r.coeffs.clone(), r.kind, 0.0))
        .collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        rec.push(Relation::new(e.clone(), RowKind::Le, 1.0));
        rec.push(Relation::new(e, RowKind::Ge, -1.0));
    }
    let best_ray = candidate_points(&rec, n, tol)
        .iter()
        .map(|d| lp.objective.iter().zip(d).map(|(c, d)| c * d).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    if best_ray > 1e-9 {
        return OracleStatus::Unbounded;
    }

    let value = candidates
        .iter()
        .map(|x| lp.objective.iter().zip(x).map(|(c, x)| c * x).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    OracleStatus::Optimal(value)
}

/// The multiplier-feasibility system at `xbar` in the variables
/// `(α_i for active i, β_j)`: `ζ := −grad − Σα g − Σβ h` must satisfy the
/// sign pattern of the bound activity. Returns the relations and the number
/// of variables.
pub fn multiplier_relations(
    prob: &Problem,
    xbar: &SimpleFunction,
    grad: &SimpleFunction,
    tol: f64,
) -> Option<(Vec<Relation>, usize)> {
    let part = prob.regions(xbar, tol).ok()?;
    let active = &part.lin_active;
    let nv = active.len() + prob.equalities().len();
    let mut rels = Vec::new();
    for k in 0..active.len() {
        let mut e = vec![0.0; nv];
        e[k] = 1.0;
        rels.push(Relation::new(e, RowKind::Ge, 0.0));
    }
    for atom in 0..prob.m() {
        // Σα g(atom) + Σβ h(atom) ⋈ −grad(atom), from the sign of ζ(atom).
        let kind = match part.atoms[atom] {
            Activity::BothActive => continue,
            Activity::LowerActive => RowKind::Ge,
            Activity::Free => RowKind::Eq,
            Activity::UpperActive => RowKind::Le,
        };
        let mut coeffs: Vec<f64> = active
            .iter()
            .map(|&i| prob.inequalities()[i].g[atom])
            .collect();
        coeffs.extend(prob.equalities().iter().map(|e| e.h[atom]));
        rels.push(Relation::new(coeffs, kind, -grad[atom]));
    }
    Some((rels, nv))
}

/// Whether KKT multipliers exist at `xbar`, decided by enumeration.
pub fn multipliers_exist(
    prob: &Problem,
    xbar: &SimpleFunction,
    grad: &SimpleFunction,
    tol: f64,
) -> Option<bool> {
    let (rels, nv) = multiplier_relations(prob, xbar, grad, tol)?;
    Some(feasible_point(&rels, nv, tol).is_some())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_solver() {
        let x = solve_square(vec![vec![2.0, 1.0], vec![1.0, 3.0]], vec![3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
        assert!(solve_square(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 2.0]).is_none());
    }

    #[test]
    fn oracle_on_textbook_lps() {
        let lp = LinearProgram::new(2)
            .maximize(vec![1.0, 1.0])
            .with_row(vec![1.0, 0.0], RowKind::Le, 1.0)
            .with_row(vec![0.0, 1.0], RowKind::Le, 1.0)
            .nonnegative();
        assert_eq!(solve_lp(&lp, 1e-9), OracleStatus::Optimal(2.0));

        let lp = LinearProgram::new(1)
            .with_row(vec![1.0], RowKind::Le, -1.0)
            .with_row(vec![-1.0], RowKind::Le, 0.0);
        assert_eq!(solve_lp(&lp, 1e-9), OracleStatus::Infeasible);

        let lp = LinearProgram::new(1).maximize(vec![1.0]).nonnegative();
        assert_eq!(solve_lp(&lp, 1e-9), OracleStatus::Unbounded);
    }

    #[test]
    fn oracle_handles_lines() {
        // max x1 subject to x1 + x2 = 1, x1 ≤ 3: optimum 3 on a line.
        let lp = LinearProgram::new(2)
            .maximize(vec![1.0, 0.0])
            .with_row(vec![1.0, 1.0], RowKind::Eq, 1.0)
            .with_row(vec![1.0, 0.0], RowKind::Le, 3.0);
        assert_eq!(solve_lp(&lp, 1e-9), OracleStatus::Optimal(3.0));
        // Objective orthogonal to a lineality direction.
        let lp = LinearProgram::new(2)
            .maximize(vec![1.0, 1.0])
            .with_row(vec![1.0, 1.0], RowKind::Le, 2.0);
        assert_eq!(solve_lp(&lp, 1e-9), OracleStatus::Optimal(2.0));
    }
}
