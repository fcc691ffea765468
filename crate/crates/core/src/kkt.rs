//! Lagrange multipliers at a candidate point.
//!
//! Stationarity reads `f'(x̄) + ζ + Σ α_i g_i + Σ β_j h_j + Σ γ_i G_i'(x̄) = 0`
//! with `ζ ∈ N_K(x̄)`, `α, γ ≥ 0` on the active constraints. The box
//! multiplier `ζ` is eliminated, which leaves an LP in `(α, β, γ)`. When it
//! has no solution its Farkas ray is a tangent direction along which `f`
//! decreases.

use serde::{Deserialize, Serialize};

use crate::cones::{
    clean_zeta, solve_generator_system, tangent_k_sign_ok, tangent_p_ok, GeneratorSolution,
    GeneratorSystem,
};
use crate::error::{Error, Result};
use crate::model::{Activity, MeasureSpace, NonlinearConstraint, Problem, RegionPartition, SimpleFunction};
use crate::slater::{find_linearized_slater, SlaterReport};

/// Relative error above which a constraint gradient is rejected.
pub const GRADIENT_RTOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub zeta: SimpleFunction,
    pub zeta_a: SimpleFunction,
    pub zeta_b: SimpleFunction,
    /// One entry per inequality; zero off the active set.
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// One entry per nonlinear constraint; zero off the active set.
    pub gamma: Vec<f64>,
}

impl Multipliers {
    /// `Σ α + Σ γ + Σ |β|`.
    pub fn size(&self) -> f64 {
        self.alpha.iter().chain(&self.gamma).sum::<f64>() + self.beta.iter().map(|b| b.abs()).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KktStatus {
    MultipliersFound,
    NoMultipliers,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktOutcome {
    pub status: KktStatus,
    pub multipliers: Option<Multipliers>,
    /// `d ∈ T_K(x̄) ∩ T_P(x̄)` (and `⟨G_i'(x̄), d⟩ ≤ 0` on the active
    /// nonlinear constraints), max-norm 1.
    pub descent: Option<SimpleFunction>,
    /// `⟨f'(x̄), d⟩`, negative.
    pub descent_slope: Option<f64>,
    /// Linearized Slater test used by the nonlinear path.
    pub slater: Option<SlaterReport>,
    pub message: Option<String>,
}

impl KktOutcome {
    fn found(m: Multipliers) -> Self {
        Self {
            status: KktStatus::MultipliersFound,
            multipliers: Some(m),
            descent: None,
            descent_slope: None,
            slater: None,
            message: None,
        }
    }
}

/// `ζ_a = max(−ζ, 0)`, `ζ_b = max(ζ, 0)` after checking the exact sign
/// pattern of `N_K`.
pub fn split_zeta(zeta: &SimpleFunction, part: &RegionPartition) -> Result<(SimpleFunction, SimpleFunction)> {
    if zeta.len() != part.atoms.len() {
        return Err(Error::DimensionMismatch {
            what: "box multiplier".into(),
            expected: part.atoms.len(),
            found: zeta.len(),
        });
    }
    for (atom, (a, &z)) in part.atoms.iter().zip(zeta.iter()).enumerate() {
        let reason = match a {
            Activity::LowerActive if z > 0.0 => "must be ≤ 0 where the lower bound is active",
            Activity::UpperActive if z < 0.0 => "must be ≥ 0 where the upper bound is active",
            Activity::Free if z != 0.0 => "must vanish where no bound is active",
            _ => continue,
        };
        return Err(Error::SignViolation {
            atom,
            reason: format!("ζ = {z}: {reason}"),
        });
    }
    Ok((zeta.map(|z| (-z).max(0.0)), zeta.map(|z| z.max(0.0))))
}

struct Generators {
    part: RegionPartition,
    /// Gradients of the active nonlinear constraints, in `part.nl_active` order.
    nl_grads: Vec<SimpleFunction>,
}

fn solve(prob: &Problem, xbar: &SimpleFunction, grad_f: &SimpleFunction, gens: &Generators, tol: f64) -> Result<KktOutcome> {
    let part = &gens.part;
    let mut cone: Vec<SimpleFunction> = part
        .lin_active
        .iter()
        .map(|&i| prob.inequalities()[i].g.clone())
        .collect();
    cone.extend(gens.nl_grads.iter().cloned());
    let sys = GeneratorSystem {
        part,
        cone_generators: cone,
        free_generators: prob.equalities().iter().map(|e| e.h.clone()).collect(),
        minimize_size: true,
    };
    let xi = grad_f.scale(-1.0);
    match solve_generator_system(prob, &sys, &xi, tol)? {
        GeneratorSolution::Found { cone, free, zeta } => {
            let na = part.lin_active.len();
            let mut alpha = vec![0.0; prob.inequalities().len()];
            for (k, &i) in part.lin_active.iter().enumerate() {
                alpha[i] = cone[k].max(0.0);
            }
            let mut gamma = vec![0.0; prob.nonlinear().len()];
            for (k, &i) in part.nl_active.iter().enumerate() {
                gamma[i] = cone[na + k].max(0.0);
            }
            let zeta = clean_zeta(part, zeta);
            let (zeta_a, zeta_b) = split_zeta(&zeta, part)?;
            let mult = Multipliers {
                zeta,
                zeta_a,
                zeta_b,
                alpha,
                beta: free,
                gamma,
            };
            let report = verify_stationarity(prob, xbar, grad_f, &mult, tol)?;
            let scale = 1.0 + grad_f.max_norm() + mult.size();
            if report.max_residual > 10.0 * tol * scale || !report.signs_ok() {
                return Err(Error::NumericalFailure(format!(
                    "multiplier LP solution fails verification (residual {:e})",
                    report.max_residual
                )));
            }
            Ok(KktOutcome::found(mult))
        }
        GeneratorSolution::Separated { direction, .. } => {
            let slope = prob.space().pairing_unchecked(grad_f.values(), direction.values());
            let in_tangent = tangent_k_sign_ok(part, &direction, tol)
                && tangent_p_ok(prob, &part.lin_active, &direction, tol)
                && gens
                    .nl_grads
                    .iter()
                    .all(|g| prob.space().pairing_unchecked(g.values(), direction.values()) <= tol);
            if !in_tangent || slope > -tol {
                return Err(Error::NumericalFailure(format!(
                    "descent direction fails verification (slope {slope:e}, tangent {in_tangent})"
                )));
            }
            Ok(KktOutcome {
                status: KktStatus::NoMultipliers,
                multipliers: None,
                descent: Some(direction),
                descent_slope: Some(slope),
                slater: None,
                message: None,
            })
        }
    }
}

/// Multipliers for `K ∩ P` at `x̄`, or a descent direction proving that
/// none exist. Nonlinear constraints of `prob` are ignored. Among all
/// multipliers the one minimizing `Σ α + Σ |β|` is returned.
pub fn recover_multipliers_linear(
    prob: &Problem,
    xbar: &SimpleFunction,
    grad_f: &SimpleFunction,
    tol: f64,
) -> Result<KktOutcome> {
    prob.check_len("objective gradient", grad_f)?;
    let linear = prob.linear_part();
    let part = linear.regions(xbar, tol)?;
    solve(
        &linear,
        xbar,
        grad_f,
        &Generators {
            part,
            nl_grads: Vec::new(),
        },
        tol,
    )
}

/// Multipliers including `γ` for the active nonlinear constraints.
///
/// Gradients are validated against central finite differences, then the
/// linearized Slater condition is tested; if it fails the outcome is
/// `NotApplicable`. Without active nonlinear constraints this is
/// [`recover_multipliers_linear`].
pub fn recover_multipliers_nonlinear(
    prob: &Problem,
    xbar: &SimpleFunction,
    grad_f: &SimpleFunction,
    tol: f64,
) -> Result<KktOutcome> {
    prob.check_len("objective gradient", grad_f)?;
    let part = prob.regions(xbar, tol)?;
    if part.nl_active.is_empty() {
        return recover_multipliers_linear(prob, xbar, grad_f, tol);
    }
    let mut nl_grads = Vec::new();
    for &i in &part.nl_active {
        let c = &prob.nonlinear()[i];
        let g = c.gradient(prob.space(), xbar);
        validate_gradient(prob.space(), c.as_ref(), xbar, &g).map_err(|e| match e {
            Error::GradientCheckFailed { relative_error, .. } => Error::GradientCheckFailed {
                constraint: i,
                relative_error,
            },
            other => other,
        })?;
        nl_grads.push(g);
    }
    let slater = find_linearized_slater(prob, xbar, tol)?;
    if !slater.found() {
        return Ok(KktOutcome {
            status: KktStatus::NotApplicable,
            multipliers: None,
            descent: None,
            descent_slope: None,
            slater: Some(slater),
            message: Some("linearized Slater condition fails; the normal cone formula is not available".into()),
        });
    }
    let mut out = solve(prob, xbar, grad_f, &Generators { part, nl_grads }, tol)?;
    out.slater = Some(slater);
    Ok(out)
}

/// Compare a gradient representer with central finite differences of `G`
/// at `x`, step `1e-6·max(1, |x_i|)`. Returns the relative error
/// `max_i |D_i − g_i μ_i| / max_i max(|D_i|, |g_i μ_i|)` where `D_i` is the
/// difference quotient along atom `i`, or `GradientCheckFailed` when it
/// exceeds [`GRADIENT_RTOL`].
pub fn validate_gradient(
    space: &MeasureSpace,
    constraint: &dyn NonlinearConstraint,
    x: &SimpleFunction,
    gradient: &SimpleFunction,
) -> Result<f64> {
    let w = space.weights();
    if x.len() != w.len() || gradient.len() != w.len() {
        return Err(Error::DimensionMismatch {
            what: "gradient check".into(),
            expected: w.len(),
            found: if x.len() != w.len() { x.len() } else { gradient.len() },
        });
    }
    let mut err: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..x.len() {
        let h = 1e-6 * x[i].abs().max(1.0);
        let mut plus = x.clone();
        plus[i] += h;
        let mut minus = x.clone();
        minus[i] -= h;
        let fd = (constraint.value(space, &plus) - constraint.value(space, &minus)) / (plus[i] - minus[i]);
        let supplied = gradient[i] * w[i];
        err = err.max((fd - supplied).abs());
        scale = scale.max(fd.abs()).max(supplied.abs());
    }
    let rel = if scale > 1e-12 { err / scale } else { err };
    if !(rel <= GRADIENT_RTOL) {
        return Err(Error::GradientCheckFailed {
            constraint: 0,
            relative_error: rel,
        });
    }
    Ok(rel)
}

/// Residuals of the first-order system for given multipliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    /// `f'(x̄) + ζ + Σ α g + Σ β h + Σ γ G'(x̄)` atom by atom.
    pub residual: SimpleFunction,
    pub max_residual: f64,
    /// Residual in the `L^{p'}` norm.
    pub dual_norm_residual: f64,
    /// Atoms where `ζ` violates the `N_K(x̄)` sign pattern.
    pub sign_violations: Vec<usize>,
    pub negative_alpha: Vec<usize>,
    pub negative_gamma: Vec<usize>,
    /// `⟨ζ_a, x̄ − x_a⟩` over atoms with finite lower bound.
    pub complementarity_a: f64,
    /// `⟨ζ_b, x_b − x̄⟩` over atoms with finite upper bound.
    pub complementarity_b: f64,
}

impl StationarityReport {
    pub fn signs_ok(&self) -> bool {
        self.sign_violations.is_empty() && self.negative_alpha.is_empty() && self.negative_gamma.is_empty()
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.dual_norm_residual <= tol && self.signs_ok()
    }
}

/// Evaluate the first-order system. Sign conditions are checked exactly;
/// bound activity uses `tol`. `x̄` must lie in the box up to `tol`.
pub fn verify_stationarity(
    prob: &Problem,
    xbar: &SimpleFunction,
    grad_f: &SimpleFunction,
    mult: &Multipliers,
    tol: f64,
) -> Result<StationarityReport> {
    prob.check_len("point", xbar)?;
    prob.check_len("objective gradient", grad_f)?;
    prob.check_len("box multiplier", &mult.zeta)?;
    let check = |what: &str, expected: usize, found: usize| {
        if expected == found {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                what: what.into(),
                expected,
                found,
            })
        }
    };
    check("alpha", prob.inequalities().len(), mult.alpha.len())?;
    check("beta", prob.equalities().len(), mult.beta.len())?;
    let gamma_len = if mult.gamma.is_empty() { 0 } else { prob.nonlinear().len() };
    check("gamma", gamma_len, mult.gamma.len())?;

    let part = prob.box_regions(xbar, tol)?;
    let mut r = grad_f.axpy(1.0, &mult.zeta);
    for (a, c) in mult.alpha.iter().zip(prob.inequalities()) {
        r = r.axpy(*a, &c.g);
    }
    for (b, c) in mult.beta.iter().zip(prob.equalities()) {
        r = r.axpy(*b, &c.h);
    }
    for (g, c) in mult.gamma.iter().zip(prob.nonlinear()) {
        if *g != 0.0 {
            r = r.axpy(*g, &c.gradient(prob.space(), xbar));
        }
    }
    let sign_violations = match split_zeta(&mult.zeta, &part) {
        Ok(_) => Vec::new(),
        Err(_) => (0..prob.m())
            .filter(|&i| {
                let z = mult.zeta[i];
                match part.atoms[i] {
                    Activity::LowerActive => z > 0.0,
                    Activity::UpperActive => z < 0.0,
                    Activity::Free => z != 0.0,
                    Activity::BothActive => false,
                }
            })
            .collect(),
    };
    let w = prob.space().weights();
    let mut comp_a = 0.0;
    let mut comp_b = 0.0;
    for i in 0..prob.m() {
        let (l, u) = (prob.lower()[i], prob.upper()[i]);
        if l.is_finite() {
            comp_a += mult.zeta_a[i] * (xbar[i] - l) * w[i];
        }
        if u.is_finite() {
            comp_b += mult.zeta_b[i] * (u - xbar[i]) * w[i];
        }
    }
    Ok(StationarityReport {
        max_residual: r.max_norm(),
        dual_norm_residual: prob.space().lp_norm_unchecked(r.values(), prob.exponent().conjugate()),
        residual: r,
        sign_violations,
        negative_alpha: (0..mult.alpha.len()).filter(|&i| mult.alpha[i] < 0.0).collect(),
        negative_gamma: (0..mult.gamma.len()).filter(|&i| mult.gamma[i] < 0.0).collect(),
        complementarity_a: comp_a,
        complementarity_b: comp_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cones::{tangent_k_contains, tangent_p_contains};
    use crate::model::{ExtBound, QuadraticConstraint};
    use std::sync::Arc;

    fn midpoint_log(m: usize) -> (Problem, SimpleFunction) {
        let prob = Problem::builder(MeasureSpace::uniform(m).unwrap())
            .bounds(ExtBound::constant(m, 0.0), ExtBound::unbounded_above(m))
            .inequality(vec![1.0; m], 0.0)
            .build()
            .unwrap();
        let z: SimpleFunction = (1..=m)
            .map(|i| ((2 * i - 1) as f64 / (2 * m) as f64).ln())
            .collect::<Vec<_>>()
            .into();
        (prob, z)
    }

    #[test]
    fn log_instance_minimal_alpha() {
        let (prob, z) = midpoint_log(4);
        let xbar = SimpleFunction::zeros(4);
        let out = recover_multipliers_linear(&prob, &xbar, &z, 1e-9).unwrap();
        assert_eq!(out.status, KktStatus::MultipliersFound);
        let mult = out.multipliers.unwrap();
        assert!((mult.alpha[0] - 8f64.ln()).abs() < 1e-12);
        assert!(mult.zeta.iter().all(|&v| v <= 0.0));
        let rep = verify_stationarity(&prob, &xbar, &z, &mult, 1e-9).unwrap();
        assert!(rep.max_residual <= 1e-9 && rep.passes(1e-9));

        let mut bumped = mult.clone();
        bumped.alpha[0] += 0.1;
        let rep = verify_stationarity(&prob, &xbar, &z, &bumped, 1e-9).unwrap();
        assert!((rep.max_residual - 0.1).abs() < 1e-12);
    }

    #[test]
    fn interior_point_zero_gradient() {
        let prob = Problem::builder(MeasureSpace::uniform(2).unwrap())
            .bounds(ExtBound::constant(2, 0.0), ExtBound::constant(2, 1.0))
            .build()
            .unwrap();
        let xbar: SimpleFunction = vec![0.5, 0.5].into();
        let out = recover_multipliers_linear(&prob, &xbar, &SimpleFunction::zeros(2), 1e-9).unwrap();
        let mult = out.multipliers.unwrap();
        assert_eq!(mult.zeta, SimpleFunction::zeros(2));

        let grad: SimpleFunction = vec![1.0, -2.0].into();
        let out = recover_multipliers_linear(&prob, &xbar, &grad, 1e-9).unwrap();
        assert_eq!(out.status, KktStatus::NoMultipliers);
        let d = out.descent.unwrap();
        assert!(out.descent_slope.unwrap() < 0.0);
        assert!(tangent_k_contains(&prob, &xbar, &d, 1e-9).unwrap());
        assert!(tangent_p_contains(&prob, &xbar, &d, 1e-9).unwrap());
    }

    #[test]
    fn infeasible_point_is_an_error() {
        let (prob, z) = midpoint_log(2);
        assert!(matches!(
            recover_multipliers_linear(&prob, &vec![1.0, 1.0].into(), &z, 1e-9),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn split_examples() {
        let part = RegionPartition {
            atoms: vec![Activity::LowerActive, Activity::Free, Activity::UpperActive],
            lin_active: vec![],
            nl_active: vec![],
        };
        let (a, b) = split_zeta(&vec![-2.0, 0.0, 3.0].into(), &part).unwrap();
        assert_eq!(a.values(), &[2.0, 0.0, 0.0]);
        assert_eq!(b.values(), &[0.0, 0.0, 3.0]);
        let (a, b) = split_zeta(&SimpleFunction::zeros(3), &part).unwrap();
        assert_eq!(a.max_norm() + b.max_norm(), 0.0);

        let lower = RegionPartition {
            atoms: vec![Activity::LowerActive],
            lin_active: vec![],
            nl_active: vec![],
        };
        assert!(matches!(
            split_zeta(&vec![5.0].into(), &lower),
            Err(Error::SignViolation { atom: 0, .. })
        ));
    }

    fn scalar_quadratic(lower: f64) -> Problem {
        Problem::builder(MeasureSpace::uniform(1).unwrap())
            .bounds(ExtBound::constant(1, lower), ExtBound::constant(1, 2.0))
            .nonlinear(Arc::new(QuadraticConstraint {
                q_matrix: vec![vec![2.0]],
                q: vec![0.0].into(),
                c: -1.0,
            }))
            .build()
            .unwrap()
    }

    #[test]
    fn scalar_quadratic_gamma_is_one() {
        let prob = scalar_quadratic(0.0);
        let out = recover_multipliers_nonlinear(&prob, &vec![1.0].into(), &vec![-2.0].into(), 1e-9).unwrap();
        assert_eq!(out.status, KktStatus::MultipliersFound);
        let mult = out.multipliers.unwrap();
        assert_eq!(mult.gamma, vec![1.0]);
        assert_eq!(mult.zeta.values(), &[0.0]);
    }

    #[test]
    fn failed_linearized_slater_is_not_applicable() {
        let prob = scalar_quadratic(1.0);
        let out = recover_multipliers_nonlinear(&prob, &vec![1.0].into(), &vec![-2.0].into(), 1e-9).unwrap();
        assert_eq!(out.status, KktStatus::NotApplicable);
        assert!(out.slater.is_some());
    }

    #[test]
    fn inactive_nonlinear_matches_linear() {
        let prob = scalar_quadratic(0.0);
        let xbar: SimpleFunction = vec![0.5].into();
        let grad: SimpleFunction = vec![0.0].into();
        assert_eq!(
            recover_multipliers_nonlinear(&prob, &xbar, &grad, 1e-9).unwrap(),
            recover_multipliers_linear(&prob, &xbar, &grad, 1e-9).unwrap()
        );
    }

    #[test]
    fn corrupted_gradient_is_rejected() {
        let prob = scalar_quadratic(0.0);
        let c = &prob.nonlinear()[0];
        let x: SimpleFunction = vec![1.0].into();
        let good = c.gradient(prob.space(), &x);
        assert!(validate_gradient(prob.space(), c.as_ref(), &x, &good).unwrap() < 1e-8);
        let bad = good.scale(1.01);
        assert!(matches!(
            validate_gradient(prob.space(), c.as_ref(), &x, &bad),
            Err(Error::GradientCheckFailed { .. })
        ));
    }
}
