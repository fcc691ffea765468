//! Tangent and normal cones of the box set `K`, the polyhedron `P` and their
//! intersection.
//!
//! At the discrete level the box is polyhedral, so `T_{K∩P} = T_K ∩ T_P`
//! and `N_{K∩P} = N_K + N_P` hold exactly and are used directly. Normal cone
//! elements are identified with their representers (functions), tangent
//! directions with points of the primal space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{self, DualVector, LinearProgram, LpOptions, LpStatus, RowKind};
use crate::model::{Activity, Problem, RegionPartition, SimpleFunction};

/// `ζ ∈ N_K(x)`: the sign pattern of the bound activity.
pub fn normal_k_sign_ok(part: &RegionPartition, zeta: &SimpleFunction, tol: f64) -> Option<usize> {
    part.atoms
        .iter()
        .zip(zeta.iter())
        .position(|(a, &z)| match a {
            Activity::BothActive => false,
            Activity::LowerActive => z > tol,
            Activity::Free => z.abs() > tol,
            Activity::UpperActive => z < -tol,
        })
}

/// `h ∈ T_K(x)`: `h ≥ 0` where the lower bound is active, `h ≤ 0` where the
/// upper bound is active, `h = 0` where both are.
pub fn tangent_k_contains(
    prob: &Problem,
    x: &SimpleFunction,
    h: &SimpleFunction,
    tol: f64,
) -> Result<bool> {
    prob.check_len("direction", h)?;
    let part = prob.box_regions(x, tol)?;
    Ok(tangent_k_sign_ok(&part, h, tol))
}

pub(crate) fn tangent_k_sign_ok(part: &RegionPartition, h: &SimpleFunction, tol: f64) -> bool {
    part.atoms.iter().zip(h.iter()).all(|(a, &d)| match a {
        Activity::BothActive => d.abs() <= tol,
        Activity::LowerActive => d >= -tol,
        Activity::Free => true,
        Activity::UpperActive => d <= tol,
    })
}

/// Largest `t₀` (possibly `+∞`) with `x + t h ∈ K` for all `t ∈ (0, t₀]`, or
/// `None` if `x + t h` leaves `K` for every `t > 0`. Exact arithmetic on the
/// gaps; no tolerance is applied.
pub fn radial_k_witness(prob: &Problem, x: &SimpleFunction, h: &SimpleFunction) -> Result<Option<f64>> {
    prob.check_len("direction", h)?;
    prob.box_regions(x, 0.0)?;
    let mut step = f64::INFINITY;
    for i in 0..prob.m() {
        let limit = if h[i] > 0.0 {
            (prob.upper()[i] - x[i]) / h[i]
        } else if h[i] < 0.0 {
            (x[i] - prob.lower()[i]) / -h[i]
        } else {
            f64::INFINITY
        };
        step = step.min(limit);
    }
    Ok((step > 0.0).then_some(step))
}

/// `ζ ∈ N_K(x)`.
pub fn normal_k_contains(
    prob: &Problem,
    x: &SimpleFunction,
    zeta: &SimpleFunction,
    tol: f64,
) -> Result<bool> {
    prob.check_len("normal vector", zeta)?;
    let part = prob.box_regions(x, tol)?;
    Ok(normal_k_sign_ok(&part, zeta, tol).is_none())
}

/// `y ∈ T_P(x)`: `⟨g_i, y⟩ ≤ 0` on the active set and `⟨h_j, y⟩ = 0`.
pub fn tangent_p_contains(
    prob: &Problem,
    x: &SimpleFunction,
    y: &SimpleFunction,
    tol: f64,
) -> Result<bool> {
    prob.check_len("direction", y)?;
    let part = polyhedron_regions(prob, x, tol)?;
    Ok(tangent_p_ok(prob, &part.lin_active, y, tol))
}

pub(crate) fn tangent_p_ok(prob: &Problem, active: &[usize], y: &SimpleFunction, tol: f64) -> bool {
    let space = prob.space();
    active
        .iter()
        .all(|&i| space.pairing_unchecked(prob.inequalities()[i].g.values(), y.values()) <= tol)
        && prob
            .equalities()
            .iter()
            .all(|e| space.pairing_unchecked(e.h.values(), y.values()).abs() <= tol)
}

/// Active sets relative to `P` alone (the box is ignored).
fn polyhedron_regions(prob: &Problem, x: &SimpleFunction, tol: f64) -> Result<RegionPartition> {
    prob.polyhedron_part().regions(x, tol).map_err(|e| match e {
        Error::Infeasible(msg) => Error::Infeasible(format!("point is not in P: {msg}")),
        other => other,
    })
}

/// Generator coefficients of an element of `N_P(x)`: `Σ_{i active} α_i g_i +
/// Σ_j β_j h_j`, stored densely (α vanishes off the active set).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyhedralNormal {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl PolyhedralNormal {
    pub fn assemble(&self, prob: &Problem) -> SimpleFunction {
        let mut out = SimpleFunction::zeros(prob.m());
        for (a, c) in self.alpha.iter().zip(prob.inequalities()) {
            if *a != 0.0 {
                out = out.axpy(*a, &c.g);
            }
        }
        for (b, c) in self.beta.iter().zip(prob.equalities()) {
            if *b != 0.0 {
                out = out.axpy(*b, &c.h);
            }
        }
        out
    }
}

/// `ξ = ζ + Σα g + Σβ h` with `ζ ∈ N_K(x)` and `(α, β)` generating an element
/// of `N_P(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub zeta: SimpleFunction,
    pub normal_p: PolyhedralNormal,
}

/// Outcome of a membership query in `N_K(x) + N_P(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SumMembership {
    Member(Decomposition),
    /// `d ∈ T_K(x) ∩ T_P(x)` with `⟨ξ, d⟩ > 0`, normalized to max-norm 1.
    Separated { direction: SimpleFunction, value: f64 },
}

/// Which generators enter the multiplier system and how to pick among
/// multiple solutions.
pub(crate) struct GeneratorSystem<'a> {
    pub part: &'a RegionPartition,
    /// Nonnegative generators (active inequalities, active nonlinear
    /// constraint gradients).
    pub cone_generators: Vec<SimpleFunction>,
    /// Free generators (equalities).
    pub free_generators: Vec<SimpleFunction>,
    /// Minimize `Σ cone + Σ |free|` among all decompositions.
    pub minimize_size: bool,
}

pub(crate) enum GeneratorSolution {
    Found {
        cone: Vec<f64>,
        free: Vec<f64>,
        zeta: SimpleFunction,
    },
    /// Farkas-derived direction (not yet normalized) and `⟨ξ, d⟩`.
    Separated { direction: SimpleFunction, value: f64 },
}

/// Decide whether `ξ − Σ c_k a_k − Σ f_l b_l` satisfies the `N_K(x)` sign
/// pattern for some `c ≥ 0` and free `f`. The box multiplier is eliminated
/// by substitution; the remaining system is an LP in `(c, f⁺, f⁻)`.
pub(crate) fn solve_generator_system(
    prob: &Problem,
    sys: &GeneratorSystem<'_>,
    xi: &SimpleFunction,
    tol: f64,
) -> Result<GeneratorSolution> {
    let nc = sys.cone_generators.len();
    let nf = sys.free_generators.len();
    let nv = nc + 2 * nf;
    let mut lp = LinearProgram::new(nv).nonnegative();
    if sys.minimize_size {
        lp.objective = vec![-1.0; nv];
    }
    let mut row_atoms = Vec::new();
    for (atom, activity) in sys.part.atoms.iter().enumerate() {
        let kind = match activity {
            Activity::BothActive => continue,
            Activity::LowerActive => RowKind::Ge,
            Activity::Free => RowKind::Eq,
            Activity::UpperActive => RowKind::Le,
        };
        let mut coeffs = Vec::with_capacity(nv);
        coeffs.extend(sys.cone_generators.iter().map(|g| g[atom]));
        for h in &sys.free_generators {
            coeffs.push(h[atom]);
        }
        for h in &sys.free_generators {
            coeffs.push(-h[atom]);
        }
        lp.add_row(coeffs, kind, xi[atom]);
        row_atoms.push(atom);
    }
    let out = lp::solve(&lp, &LpOptions::with_feas_tol(tol))?;
    match out.status {
        LpStatus::Optimal => {
            let cone = out.x[..nc].to_vec();
            let free: Vec<f64> = (0..nf).map(|l| out.x[nc + l] - out.x[nc + nf + l]).collect();
            let mut zeta = xi.clone();
            for (c, g) in cone.iter().zip(&sys.cone_generators) {
                zeta = zeta.axpy(-c, g);
            }
            for (f, h) in free.iter().zip(&sys.free_generators) {
                zeta = zeta.axpy(-f, h);
            }
            Ok(GeneratorSolution::Found { cone, free, zeta })
        }
        LpStatus::Infeasible => {
            let ray = out.farkas.expect("infeasible LP carries a Farkas ray");
            Ok(separating_direction(prob, &ray, &row_atoms, xi))
        }
        LpStatus::Unbounded => Err(Error::NumericalFailure(
            "multiplier LP reported unbounded".into(),
        )),
        LpStatus::NumericalFailure => Err(Error::NumericalFailure(
            out.message.unwrap_or_else(|| "multiplier LP failed".into()),
        )),
    }
}

/// Turn the Farkas ray `y` of the multiplier system into a tangent direction:
/// `d_k = −y_k / μ_k` on atoms with a row, `0` elsewhere.
fn separating_direction(
    prob: &Problem,
    ray: &DualVector,
    row_atoms: &[usize],
    xi: &SimpleFunction,
) -> GeneratorSolution {
    let w = prob.space().weights();
    let mut d = SimpleFunction::zeros(prob.m());
    for (y, &atom) in ray.rows.iter().zip(row_atoms) {
        d[atom] = -y / w[atom];
    }
    let norm = d.max_norm();
    if norm > 0.0 {
        d = d.scale(1.0 / norm);
    }
    let value = prob.space().pairing_unchecked(xi.values(), d.values());
    GeneratorSolution::Separated {
        direction: d,
        value,
    }
}

/// Decide `ξ ∈ N_K(x) + N_P(x)` at a point of `K ∩ P`.
pub fn sum_nk_np_contains(
    prob: &Problem,
    x: &SimpleFunction,
    xi: &SimpleFunction,
    tol: f64,
) -> Result<SumMembership> {
    prob.check_len("normal vector", xi)?;
    let part = prob.linear_part().regions(x, tol)?;
    let sys = GeneratorSystem {
        part: &part,
        cone_generators: part
            .lin_active
            .iter()
            .map(|&i| prob.inequalities()[i].g.clone())
            .collect(),
        free_generators: prob.equalities().iter().map(|e| e.h.clone()).collect(),
        minimize_size: false,
    };
    Ok(match solve_generator_system(prob, &sys, xi, tol)? {
        GeneratorSolution::Found { cone, free, zeta } => {
            let mut alpha = vec![0.0; prob.inequalities().len()];
            for (c, &i) in cone.iter().zip(&part.lin_active) {
                alpha[i] = *c;
            }
            SumMembership::Member(Decomposition {
                zeta: clean_zeta(&part, zeta),
                normal_p: PolyhedralNormal { alpha, beta: free },
            })
        }
        GeneratorSolution::Separated { direction, value } => {
            SumMembership::Separated { direction, value }
        }
    })
}

/// Decide `ζ ∈ N_P(x)` and return generator coefficients if so.
pub fn normal_p_decompose(
    prob: &Problem,
    x: &SimpleFunction,
    zeta: &SimpleFunction,
    tol: f64,
) -> Result<Option<PolyhedralNormal>> {
    prob.check_len("normal vector", zeta)?;
    let part = polyhedron_regions(prob, x, tol)?;
    let active = &part.lin_active;
    let na = active.len();
    let neq = prob.equalities().len();
    let mut lp = LinearProgram::new(na + neq);
    for k in 0..na {
        lp.set_bounds(k, 0.0, f64::INFINITY);
    }
    for atom in 0..prob.m() {
        let mut coeffs: Vec<f64> = active.iter().map(|&i| prob.inequalities()[i].g[atom]).collect();
        coeffs.extend(prob.equalities().iter().map(|e| e.h[atom]));
        lp.add_row(coeffs, RowKind::Eq, zeta[atom]);
    }
    match lp::feasibility(&lp, &LpOptions::with_feas_tol(tol))? {
        lp::Feasibility::Feasible(v) => {
            let mut alpha = vec![0.0; prob.inequalities().len()];
            for (k, &i) in active.iter().enumerate() {
                alpha[i] = v[k].max(0.0);
            }
            Ok(Some(PolyhedralNormal {
                alpha,
                beta: v[na..].to_vec(),
            }))
        }
        lp::Feasibility::Infeasible(_) => Ok(None),
        lp::Feasibility::NumericalFailure(msg) => Err(Error::NumericalFailure(msg)),
    }
}

/// Force the exact sign pattern on a box multiplier whose entries are within
/// solver tolerance of it.
pub(crate) fn clean_zeta(part: &RegionPartition, mut zeta: SimpleFunction) -> SimpleFunction {
    for (i, a) in part.atoms.iter().enumerate() {
        match a {
            Activity::BothActive => {}
            Activity::LowerActive => zeta[i] = zeta[i].min(0.0),
            Activity::Free => zeta[i] = 0.0,
            Activity::UpperActive => zeta[i] = zeta[i].max(0.0),
        }
    }
    zeta
}

/// `ξ_k`: `min(ξ, kζ)` where `ζ > 0`, `max(ξ, kζ)` where `ζ < 0`, `0`
/// elsewhere.
///
/// For `ζ ∈ N_P(x) ∩ −N_K(x)` and `ξ = 0` on `{ζ = 0}` this gives
/// `ξ_k − kζ ∈ N_K(x)`, hence `ξ_k ∈ N_K(x) + N_P(x)`, and `ξ_k → ξ`.
pub fn closure_sequence(
    prob: &Problem,
    x: &SimpleFunction,
    zeta_cert: &SimpleFunction,
    xi: &SimpleFunction,
    k: f64,
    tol: f64,
) -> Result<SimpleFunction> {
    prob.check_len("certificate", zeta_cert)?;
    prob.check_len("target", xi)?;
    if !(k >= 1.0) {
        return Err(Error::Precondition(format!("closure index k = {k} must be at least 1")));
    }
    if let Some(atom) = (0..prob.m()).find(|&i| zeta_cert[i] == 0.0 && xi[i] != 0.0) {
        return Err(Error::Precondition(format!(
            "target does not vanish where the certificate does (atom {atom})"
        )));
    }
    if !normal_k_contains(prob, x, &zeta_cert.scale(-1.0), tol)? {
        return Err(Error::Precondition("certificate is not in −N_K(x)".into()));
    }
    if normal_p_decompose(prob, x, zeta_cert, tol)?.is_none() {
        return Err(Error::Precondition("certificate is not in N_P(x)".into()));
    }
    Ok(closure_term(zeta_cert, xi, k))
}

pub(crate) fn closure_term(zeta: &SimpleFunction, xi: &SimpleFunction, k: f64) -> SimpleFunction {
    zeta.iter()
        .zip(xi.iter())
        .map(|(&z, &v)| {
            if z > 0.0 {
                v.min(k * z)
            } else if z < 0.0 {
                v.max(k * z)
            } else {
                0.0
            }
        })
        .collect::<Vec<_>>()
        .into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ExtBound, MeasureSpace};

    fn unit_box(m: usize) -> Problem {
        Problem::builder(MeasureSpace::uniform(m).unwrap())
            .bounds(ExtBound::constant(m, 0.0), ExtBound::constant(m, 1.0))
            .build()
            .unwrap()
    }

    fn counterexample() -> Problem {
        Problem::builder(MeasureSpace::new(vec![0.5, 0.5]).unwrap())
            .bounds(ExtBound::constant(2, 0.0), ExtBound::unbounded_above(2))
            .inequality(vec![1.0, 1.0], 0.0)
            .build()
            .unwrap()
    }

    fn f(v: &[f64]) -> SimpleFunction {
        v.to_vec().into()
    }

    #[test]
    fn tangent_k_examples() {
        let prob = unit_box(2);
        let x = f(&[0.0, 0.5]);
        assert!(tangent_k_contains(&prob, &x, &f(&[1.0, -5.0]), 1e-12).unwrap());
        assert!(!tangent_k_contains(&prob, &x, &f(&[-1.0, 3.0]), 1e-12).unwrap());
        assert!(tangent_k_contains(&prob, &x, &f(&[0.0, 0.0]), 1e-12).unwrap());
    }

    #[test]
    fn tangent_k_rejects_points_outside_the_box() {
        let err = tangent_k_contains(&unit_box(1), &f(&[2.0]), &f(&[0.0]), 1e-12).unwrap_err();
        assert!(matches!(err, Error::NotInBox { atom: 0 }));
    }

    #[test]
    fn radial_examples() {
        let prob = unit_box(1);
        assert_eq!(radial_k_witness(&prob, &f(&[0.5]), &f(&[1.0])).unwrap(), Some(0.5));
        assert_eq!(radial_k_witness(&prob, &f(&[0.0]), &f(&[-1.0])).unwrap(), None);
        let half_line = Problem::builder(MeasureSpace::uniform(1).unwrap())
            .lower(ExtBound::constant(1, 0.0))
            .build()
            .unwrap();
        assert_eq!(
            radial_k_witness(&half_line, &f(&[0.0]), &f(&[1.0])).unwrap(),
            Some(f64::INFINITY)
        );
    }

    #[test]
    fn normal_k_examples() {
        let prob = unit_box(2);
        let x = f(&[0.0, 0.5]);
        assert!(normal_k_contains(&prob, &x, &f(&[-2.0, 0.0]), 1e-12).unwrap());
        assert!(!normal_k_contains(&prob, &x, &f(&[0.0, 1.0]), 1e-12).unwrap());
        assert!(normal_k_contains(&prob, &x, &f(&[0.0, 0.0]), 1e-12).unwrap());
    }

    #[test]
    fn tangent_p_examples() {
        let prob = counterexample();
        let x = f(&[0.0, 0.0]);
        assert!(tangent_p_contains(&prob, &x, &f(&[-1.0, -1.0]), 1e-12).unwrap());
        assert!(!tangent_p_contains(&prob, &x, &f(&[1.0, 1.0]), 1e-12).unwrap());
        assert!(tangent_p_contains(&prob, &x, &f(&[0.0, 0.0]), 1e-12).unwrap());
    }

    #[test]
    fn sum_membership_examples() {
        let prob = counterexample();
        let x = f(&[0.0, 0.0]);
        match sum_nk_np_contains(&prob, &x, &f(&[1.0, 1.0]), 1e-9).unwrap() {
            SumMembership::Member(d) => {
                assert!((d.normal_p.alpha[0] - 1.0).abs() < 1e-12);
                assert!(d.zeta.max_norm() < 1e-12);
            }
            other => panic!("expected membership, got {other:?}"),
        }
        match sum_nk_np_contains(&prob, &x, &f(&[-3.0, 0.0]), 1e-9).unwrap() {
            SumMembership::Member(d) => {
                assert_eq!(d.normal_p.alpha[0], 0.0);
                assert_eq!(d.zeta, f(&[-3.0, 0.0]));
            }
            other => panic!("expected membership, got {other:?}"),
        }

        let interior = unit_box(1);
        match sum_nk_np_contains(&interior, &f(&[0.5]), &f(&[1.0]), 1e-9).unwrap() {
            SumMembership::Separated { direction, value } => {
                assert_eq!(direction, f(&[1.0]));
                assert!(value > 0.0);
            }
            other => panic!("expected separation, got {other:?}"),
        }
    }

    #[test]
    fn normal_p_membership() {
        let prob = counterexample();
        let x = f(&[0.0, 0.0]);
        let d = normal_p_decompose(&prob, &x, &f(&[2.0, 2.0]), 1e-9).unwrap().unwrap();
        assert!((d.alpha[0] - 2.0).abs() < 1e-12);
        assert!(normal_p_decompose(&prob, &x, &f(&[-1.0, -1.0]), 1e-9).unwrap().is_none());
        assert!(normal_p_decompose(&prob, &x, &f(&[1.0, 0.0]), 1e-9).unwrap().is_none());
    }

    #[test]
    fn closure_sequence_examples() {
        let prob = Problem::builder(MeasureSpace::new(vec![0.5, 0.5]).unwrap())
            .bounds(ExtBound::constant(2, 0.0), ExtBound::unbounded_above(2))
            .inequality(vec![1.0, 0.0], 0.0)
            .build()
            .unwrap();
        let x = f(&[0.0, 0.0]);
        let zeta = f(&[1.0, 0.0]);
        let xi = f(&[5.0, 0.0]);
        assert_eq!(closure_sequence(&prob, &x, &zeta, &xi, 2.0, 1e-9).unwrap(), f(&[2.0, 0.0]));
        assert_eq!(closure_sequence(&prob, &x, &zeta, &xi, 10.0, 1e-9).unwrap(), f(&[5.0, 0.0]));
        let zero = f(&[0.0, 0.0]);
        for k in [1.0, 3.0, 100.0] {
            assert_eq!(closure_sequence(&prob, &x, &zeta, &zero, k, 1e-9).unwrap(), zero);
        }
    }

    #[test]
    fn closure_sequence_checks_preconditions() {
        let prob = counterexample();
        let x = f(&[0.0, 0.0]);
        let zeta = f(&[1.0, 1.0]);
        assert!(closure_sequence(&prob, &x, &zeta, &f(&[1.0, 1.0]), 0.5, 1e-9).is_err());
        // −ζ must lie in N_K: ζ = −1 at a lower-active atom is wrong.
        assert!(closure_sequence(&prob, &x, &f(&[-1.0, -1.0]), &f(&[1.0, 1.0]), 1.0, 1e-9).is_err());
        let support = Problem::builder(MeasureSpace::new(vec![0.5, 0.5]).unwrap())
            .bounds(ExtBound::constant(2, 0.0), ExtBound::unbounded_above(2))
            .inequality(vec![1.0, 0.0], 0.0)
            .build()
            .unwrap();
        assert!(closure_sequence(&support, &x, &f(&[1.0, 0.0]), &f(&[1.0, 1.0]), 1.0, 1e-9).is_err());
    }
}
