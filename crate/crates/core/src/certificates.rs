//! Dual certificates for the absence of Slater points, objective functionals
//! without multipliers, and mesh-refinement studies of multiplier growth.

use serde::{Deserialize, Serialize};

use crate::cones::{normal_k_contains, normal_p_decompose};
use crate::error::{Error, Result};
use crate::kkt::{recover_multipliers_linear, verify_stationarity, KktStatus};
use crate::lp::{self, LinearProgram, LpOptions, LpStatus, RowKind};
use crate::model::{Activity, ExtBound, Exponent, MeasureSpace, Problem, SimpleFunction};
use crate::preprocess::{build_mfcq_system, MfcqSystem};
use crate::serde_ext::ext_float;

/// How the certificate LP was normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `Σλ + Σ|μ| = 1`, maximizing `⟨ζ, x̄ − x̃⟩`.
    Separation,
    /// `Σ_i s_i ζ_i μ_i = 1` with `s_i = ±1` the sign that `ζ` must have at
    /// an active atom. Used when the separation value vanishes, which
    /// happens when only equalities contribute to `ζ`.
    ActiveMass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateCheck {
    /// `‖ζ − Σλ g̃ − Σμ h̃‖_∞`.
    pub generator_residual: f64,
    /// Largest violation of the `−N_K(x̄)` sign pattern by `ζ`.
    pub sign_residual: f64,
    /// `ζ ∈ N_P(x̄)` re-derived from the original constraints.
    pub normal_p: bool,
    /// `−ζ ∈ N_K(x̄)`.
    pub minus_normal_k: bool,
}

/// Nonzero `ζ ∈ N_P(x̄) ∩ −N_K(x̄)`, written as `ζ = Σ λ_i g̃_i + Σ μ_j h̃_j`
/// over the reduced constraint system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoSlaterCertificate {
    /// Max-norm 1.
    pub zeta: SimpleFunction,
    /// One entry per reduced inequality; zero off the active set.
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub tilde_active: Vec<usize>,
    pub system: MfcqSystem,
    pub normalization: Normalization,
    /// `⟨ζ, x̄ − x̃⟩` for the returned (rescaled) `ζ`.
    pub separation: f64,
    /// Atom where `|ζ|` is maximal.
    pub nonzero_atom: usize,
    pub check: CertificateCheck,
}

fn sign_residual(part: &crate::model::RegionPartition, zeta: &SimpleFunction) -> f64 {
    let mut r: f64 = 0.0;
    for (a, &z) in part.atoms.iter().zip(zeta.iter()) {
        r = r.max(match a {
            Activity::LowerActive => -z,
            Activity::UpperActive => z,
            Activity::Free => z.abs(),
            Activity::BothActive => 0.0,
        });
    }
    r
}

/// Build a certificate that `prob` has no Slater point, at a feasible `x̄`.
///
/// Requires `lower < upper` at every atom. If a Slater point exists the LP
/// has no admissible solution and `CertificateNotFound` is returned.
pub fn build_no_slater_certificate(prob: &Problem, xbar: &SimpleFunction, tol: f64) -> Result<NoSlaterCertificate> {
    let linear = prob.linear_part();
    if let Some(atom) = (0..prob.m()).find(|&i| prob.lower()[i] >= prob.upper()[i]) {
        return Err(Error::DegenerateBounds { atom });
    }
    let box_part = linear.regions(xbar, tol)?;
    let system = build_mfcq_system(&linear, tol)?;
    let tilde = system.to_problem(&linear)?;
    let tilde_active = tilde.regions(xbar, tol)?.lin_active;

    let space = prob.space();
    let mut gens: Vec<&SimpleFunction> = tilde_active.iter().map(|&i| &system.tilde_ineq[i].g).collect();
    let na = gens.len();
    gens.extend(system.tilde_eq.iter().map(|e| &e.h));
    let neq = system.tilde_eq.len();
    let nv = na + 2 * neq;
    let column = |v: usize| -> (&SimpleFunction, f64) {
        if v < na + neq {
            (gens[v], 1.0)
        } else {
            (gens[v - neq], -1.0)
        }
    };

    let mut base = LinearProgram::new(nv).nonnegative();
    for (atom, a) in box_part.atoms.iter().enumerate() {
        let kind = match a {
            Activity::LowerActive => RowKind::Ge,
            Activity::UpperActive => RowKind::Le,
            Activity::Free => RowKind::Eq,
            Activity::BothActive => continue,
        };
        base.add_row((0..nv).map(|v| column(v).1 * column(v).0[atom]).collect(), kind, 0.0);
    }

    let step = xbar.axpy(-1.0, &system.witness);
    let mut sep = base.clone();
    sep.objective = (0..nv)
        .map(|v| column(v).1 * space.pairing_unchecked(column(v).0.values(), step.values()))
        .collect();
    sep.add_row(vec![1.0; nv], RowKind::Eq, 1.0);
    let opts = LpOptions::with_feas_tol(tol);
    let out = lp::solve(&sep, &opts)?;
    let (coeffs, normalization) = match out.status {
        LpStatus::Optimal if out.objective > tol => (out.x, Normalization::Separation),
        LpStatus::Optimal | LpStatus::Infeasible => {
            let mut mass = base;
            let w = space.weights();
            let row: Vec<f64> = (0..nv)
                .map(|v| {
                    let (g, s) = column(v);
                    box_part
                        .atoms
                        .iter()
                        .enumerate()
                        .map(|(i, a)| match a {
                            Activity::LowerActive => s * g[i] * w[i],
                            Activity::UpperActive => -s * g[i] * w[i],
                            _ => 0.0,
                        })
                        .sum()
                })
                .collect();
            mass.add_row(row, RowKind::Eq, 1.0);
            match lp::feasibility(&mass, &opts)? {
                lp::Feasibility::Feasible(x) => (x, Normalization::ActiveMass),
                lp::Feasibility::Infeasible(_) => {
                    return Err(Error::CertificateNotFound(format!(
                        "separation value {:e} and no nonzero ζ with the required signs",
                        out.objective
                    )))
                }
                lp::Feasibility::NumericalFailure(msg) => return Err(Error::NumericalFailure(msg)),
            }
        }
        _ => {
            return Err(Error::NumericalFailure(
                out.message.unwrap_or_else(|| format!("certificate LP ended with {:?}", out.status)),
            ))
        }
    };

    let mut zeta = SimpleFunction::zeros(prob.m());
    for (v, c) in coeffs.iter().enumerate() {
        if *c != 0.0 {
            let (g, s) = column(v);
            zeta = zeta.axpy(s * c, g);
        }
    }
    let norm = zeta.max_norm();
    if !(norm > tol) {
        return Err(Error::CertificateNotFound(format!("ζ vanishes (max-norm {norm:e})")));
    }
    let scale = 1.0 / norm;
    zeta = zeta.scale(scale).map(|z| if z.abs() <= tol { 0.0 } else { z });
    let mut lambda = vec![0.0; system.tilde_ineq.len()];
    for (k, &i) in tilde_active.iter().enumerate() {
        lambda[i] = coeffs[k].max(0.0) * scale;
    }
    let mu: Vec<f64> = (0..neq).map(|j| (coeffs[na + j] - coeffs[na + neq + j]) * scale).collect();

    let mut assembled = SimpleFunction::zeros(prob.m());
    for (l, c) in lambda.iter().zip(&system.tilde_ineq) {
        assembled = assembled.axpy(*l, &c.g);
    }
    for (m, e) in mu.iter().zip(&system.tilde_eq) {
        assembled = assembled.axpy(*m, &e.h);
    }
    let check = CertificateCheck {
        generator_residual: assembled.axpy(-1.0, &zeta).max_norm(),
        sign_residual: sign_residual(&box_part, &zeta),
        normal_p: normal_p_decompose(&linear, xbar, &zeta, tol)?.is_some(),
        minus_normal_k: normal_k_contains(&linear, xbar, &zeta.scale(-1.0), tol)?,
    };
    if !(check.normal_p && check.minus_normal_k) {
        return Err(Error::CertificateNotFound(format!(
            "candidate fails verification (N_P: {}, −N_K: {})",
            check.normal_p, check.minus_normal_k
        )));
    }
    let nonzero_atom = (0..prob.m())
        .max_by(|&a, &b| zeta[a].abs().total_cmp(&zeta[b].abs()))
        .expect("nonempty space");
    Ok(NoSlaterCertificate {
        separation: space.pairing_unchecked(zeta.values(), step.values()),
        zeta,
        lambda,
        mu,
        tilde_active,
        system,
        normalization,
        nonzero_atom,
        check,
    })
}

/// A function on `(0, 1)` sampled at cell midpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Constant { value: f64 },
    /// `scale · ln t`.
    Log { scale: f64 },
    /// `scale · t^exponent`.
    Power { scale: f64, exponent: f64 },
    /// `intercept + slope · t`.
    Affine { intercept: f64, slope: f64 },
}

impl Profile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Profile::Constant { value } => value,
            Profile::Log { scale } => scale * t.ln(),
            Profile::Power { scale, exponent } => scale * t.powf(exponent),
            Profile::Affine { intercept, slope } => intercept + slope * t,
        }
    }

    /// Values at `t_i = (2i − 1)/(2M)`, `i = 1..M`.
    pub fn sample(&self, m: usize) -> SimpleFunction {
        midpoints(m).into_iter().map(|t| self.eval(t)).collect::<Vec<_>>().into()
    }
}

/// Midpoints of the `M` equal cells of `(0, 1)`.
pub fn midpoints(m: usize) -> Vec<f64> {
    (1..=m).map(|i| (2 * i - 1) as f64 / (2 * m) as f64).collect()
}

/// Shape of the functional returned by [`build_bad_functional`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BadProfile {
    /// `ln t`: unbounded below, multipliers diverge under refinement.
    Log,
    /// `−1`: bounded, multipliers stay bounded.
    Constant,
}

/// `z = −ξ` with `ξ` supported on `{ζ ≠ 0}`, carrying the sign of `ζ`, and
/// `|ξ|` the profile `−ln t` (or `1`) sampled at the midpoints of the
/// support atoms in index order. On the built-in model this is
/// `z_i = ln((2i − 1)/(2M))`.
pub fn build_bad_functional(
    prob: &Problem,
    xbar: &SimpleFunction,
    cert: &NoSlaterCertificate,
    profile: BadProfile,
) -> Result<SimpleFunction> {
    prob.check_len("point", xbar)?;
    prob.check_len("certificate", &cert.zeta)?;
    let support: Vec<usize> = (0..prob.m()).filter(|&i| cert.zeta[i] != 0.0).collect();
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    let ts = midpoints(support.len());
    let mut z = SimpleFunction::zeros(prob.m());
    for (&i, &t) in support.iter().zip(&ts) {
        let magnitude = match profile {
            BadProfile::Log => -t.ln(),
            BadProfile::Constant => 1.0,
        };
        z[i] = -cert.zeta[i].signum() * magnitude;
    }
    Ok(z)
}

fn ext_default_zero() -> f64 {
    0.0
}

/// A family of problems on `(0, 1)`: level `M` uses `M` cells of weight
/// `1/M` and samples every profile at the cell midpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateFamily {
    #[serde(with = "ext_float", default = "ext_default_zero")]
    pub lower: f64,
    #[serde(with = "ext_float")]
    pub upper: f64,
    #[serde(default)]
    pub ineq: Vec<TemplateInequality>,
    #[serde(default)]
    pub eq: Vec<TemplateEquality>,
    pub objective: Profile,
    /// Query point; zero if absent.
    #[serde(default)]
    pub point: Option<Profile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateInequality {
    pub g: Profile,
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateEquality {
    pub h: Profile,
    pub b: f64,
}

impl TemplateFamily {
    /// The family with `lower = 0`, `upper = ∞`, `⟨1, x⟩ ≤ 0`.
    fn cone_family(objective: Profile) -> Self {
        Self {
            lower: 0.0,
            upper: f64::INFINITY,
            ineq: vec![TemplateInequality {
                g: Profile::Constant { value: 1.0 },
                a: 0.0,
            }],
            eq: Vec::new(),
            objective,
            point: None,
        }
    }

    /// Level `M`: problem, objective gradient and query point.
    pub fn instance(&self, m: usize) -> Result<(Problem, SimpleFunction, SimpleFunction)> {
        let mut b = Problem::builder(MeasureSpace::uniform(m)?)
            .exponent(Exponent::Finite(2.0))
            .bounds(ExtBound::new(vec![self.lower; m])?, ExtBound::new(vec![self.upper; m])?);
        for c in &self.ineq {
            b = b.inequality(c.g.sample(m), c.a);
        }
        for c in &self.eq {
            b = b.equality(c.h.sample(m), c.b);
        }
        let point = self.point.map_or_else(|| SimpleFunction::zeros(m), |p| p.sample(m));
        Ok((b.build()?, self.objective.sample(m), point))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RefinementModel {
    /// `lower = 0`, `upper = ∞`, `⟨1, x⟩ ≤ 0`, `z = ln t`, `x̄ = 0`.
    LogCounterexample,
    /// Same constraints with `z ≡ −1`.
    BoundedControl,
    Template(TemplateFamily),
}

impl RefinementModel {
    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "log-counterexample" => Ok(Self::LogCounterexample),
            "bounded-control" | "control" => Ok(Self::BoundedControl),
            other => Err(Error::UnknownModel(other.into())),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Self::LogCounterexample => "log-counterexample",
            Self::BoundedControl => "bounded-control",
            Self::Template(_) => "template",
        }
    }

    pub fn family(&self) -> TemplateFamily {
        match self {
            Self::LogCounterexample => TemplateFamily::cone_family(Profile::Log { scale: 1.0 }),
            Self::BoundedControl => TemplateFamily::cone_family(Profile::Constant { value: -1.0 }),
            Self::Template(t) => t.clone(),
        }
    }

    /// Closed-form minimal multiplier, when known.
    pub fn expected(&self, m: usize) -> Option<f64> {
        match self {
            Self::LogCounterexample => Some((2.0 * m as f64).ln()),
            Self::BoundedControl => Some(1.0),
            Self::Template(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    #[serde(rename = "M")]
    pub m: usize,
    pub status: KktStatus,
    /// `Σα + Σ|β|` of the minimal multiplier (NaN without multipliers).
    pub alpha_min: f64,
    /// Max-norm stationarity residual.
    pub residual: f64,
    pub expected: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    /// Least-squares fit `alpha_min ≈ intercept + slope · ln M`.
    pub intercept: f64,
    pub slope: f64,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementReport {
    pub model: String,
    pub rows: Vec<RefinementRow>,
    pub growth: Option<GrowthFit>,
}

impl RefinementReport {
    /// Columns `M,alpha_min,residual`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("M,alpha_min,residual\n");
        for r in &self.rows {
            out.push_str(&format!("{},{:.16e},{:.16e}\n", r.m, r.alpha_min, r.residual));
        }
        out
    }

    /// Largest `|alpha_min − expected|` over rows with a closed form.
    pub fn max_error(&self) -> Option<f64> {
        self.rows
            .iter()
            .filter_map(|r| r.expected.map(|e| (r.alpha_min - e).abs()))
            .reduce(f64::max)
    }
}

fn fit_growth(rows: &[RefinementRow]) -> Option<GrowthFit> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.alpha_min.is_finite())
        .map(|r| ((r.m as f64).ln(), r.alpha_min))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let spread = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max)
        - pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let description = if spread <= 1e-9 * (1.0 + my.abs()) {
        format!("bounded: constant {my:.6}")
    } else if slope > 0.0 {
        format!("unbounded: grows like {slope:.6}·ln M + {intercept:.6}")
    } else {
        format!("decreasing: {slope:.6}·ln M + {intercept:.6}")
    };
    Some(GrowthFit {
        intercept,
        slope,
        description,
    })
}

/// Minimal multipliers at each level of a refinement family.
pub fn refinement_study(model: &RefinementModel, levels: &[usize], tol: f64) -> Result<RefinementReport> {
    let family = model.family();
    let mut levels = levels.to_vec();
    levels.sort_unstable();
    levels.dedup();
    if levels.first() == Some(&0) {
        return Err(Error::EmptySpace);
    }
    let mut rows = Vec::with_capacity(levels.len());
    for m in levels {
        let (prob, z, xbar) = family.instance(m)?;
        let out = recover_multipliers_linear(&prob, &xbar, &z, tol)?;
        let (alpha_min, residual) = match &out.multipliers {
            Some(mult) => {
                let rep = verify_stationarity(&prob, &xbar, &z, mult, tol)?;
                (mult.size(), rep.max_residual)
            }
            None => (f64::NAN, f64::NAN),
        };
        rows.push(RefinementRow {
            m,
            status: out.status,
            alpha_min,
            residual,
            expected: model.expected(m),
        });
    }
    Ok(RefinementReport {
        model: model.id().into(),
        growth: fit_growth(&rows),
        rows,
    })
}
