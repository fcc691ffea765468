//! The acceptance suite: seeded end-to-end checks against closed forms and
//! brute-force oracles. Used by the `acceptance` test target and by the
//! command-line `selftest`.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::certificates::{
    build_bad_functional, build_no_slater_certificate, refinement_study, BadProfile, RefinementModel,
};
use crate::cones::{
    closure_sequence, normal_k_contains, radial_k_witness, sum_nk_np_contains, tangent_k_contains,
    tangent_p_contains, SumMembership,
};
use crate::kkt::{recover_multipliers_linear, recover_multipliers_nonlinear, validate_gradient, verify_stationarity, KktStatus};
use crate::lp::{self, LinearProgram, LpOptions, LpStatus, RowKind};
use crate::model::{Activity, ExtBound, MeasureSpace, Problem, QuadraticConstraint, SimpleFunction};
use crate::oracle::{multipliers_exist, solve_lp, solve_square, OracleStatus};
use crate::preprocess::build_mfcq_system;
use crate::slater::find_slater;

/// Default tolerance of the suite.
pub const TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(
            f,
            "[{}] {} {} ({:.3} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.detail
        )
    }
}

pub const CRITERIA: [(u8, &str); 10] = [
    (0, "activity classification"),
    (1, "counterexample: no Slater point, certificate g1"),
    (2, "divergence law ln(2M) and bounded control"),
    (3, "KKT status vs basis-enumeration oracle"),
    (4, "Slater necessity equivalence"),
    (5, "preprocess equivalence"),
    (6, "cone properties"),
    (7, "closure sequence"),
    (8, "nonlinear path"),
    (9, "LP engine vs vertex enumeration"),
];

/// Run one criterion. `tol` only affects the activity check (criterion 0);
/// every other criterion runs at its own fixed tolerance.
pub fn run_criterion(id: u8, tol: f64) -> CriterionResult {
    let start = Instant::now();
    let outcome = match id {
        0 => activity(tol),
        1 => counterexample(),
        2 => divergence(),
        3 => kkt_oracle(),
        4 => slater_equivalence(),
        5 => preprocess_equivalence(),
        6 => cone_properties(),
        7 => closure(),
        8 => nonlinear(),
        9 => lp_oracle(),
        _ => Err(format!("unknown criterion {id}")),
    };
    let seconds = start.elapsed().as_secs_f64();
    let limit = match id {
        1 => Some(1.0),
        2 => Some(10.0),
        3 => Some(60.0),
        _ => None,
    };
    let (mut passed, mut detail) = match outcome {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    if let Some(limit) = limit {
        if seconds >= limit {
            passed = false;
            detail = format!("{detail}; runtime {seconds:.3} s exceeds {limit} s");
        }
    }
    CriterionResult {
        id,
        name: CRITERIA.iter().find(|c| c.0 == id).map_or("unknown", |c| c.1),
        passed,
        detail,
        seconds,
    }
}

pub fn run_all(tol: f64) -> Vec<CriterionResult> {
    CRITERIA.iter().map(|&(id, _)| run_criterion(id, tol)).collect()
}

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn activity(tol: f64) -> Check {
    let prob = Problem::builder(MeasureSpace::uniform(4).map_err(|e| e.to_string())?)
        .bounds(
            ExtBound::new(vec![0.0, 0.0, 0.0, f64::NEG_INFINITY]).map_err(|e| e.to_string())?,
            ExtBound::new(vec![1.0, 1.0, 1.0, f64::INFINITY]).map_err(|e| e.to_string())?,
        )
        .build()
        .map_err(|e| e.to_string())?;
    let x: SimpleFunction = vec![0.0, 0.5, 1.0, 3.0].into();
    let part = prob.box_regions(&x, tol).map_err(|e| e.to_string())?;
    let expected = [Activity::LowerActive, Activity::Free, Activity::UpperActive, Activity::Free];
    ensure(part.atoms == expected, || {
        format!("tol {tol:e}: classified {:?}, expected {:?}", part.atoms, expected)
    })?;
    Ok(format!("4 atoms classified correctly at tol {tol:e}"))
}

fn counterexample() -> Check {
    let mut worst: f64 = 0.0;
    for m in [4, 16, 64, 256] {
        let (prob, _, xbar) = RefinementModel::LogCounterexample
            .family()
            .instance(m)
            .map_err(|e| e.to_string())?;
        let rep = find_slater(&prob, TOL).map_err(|e| e.to_string())?;
        ensure(!rep.found(), || format!("M = {m}: Slater point reported"))?;
        let cert = build_no_slater_certificate(&prob, &xbar, TOL).map_err(|e| format!("M = {m}: {e}"))?;
        let dev = cert.zeta.iter().map(|z| (z - 1.0).abs()).fold(0.0, f64::max);
        ensure(dev <= TOL, || format!("M = {m}: ζ deviates from g1 by {dev:e}"))?;
        ensure(cert.check.normal_p && cert.check.minus_normal_k, || {
            format!("M = {m}: cone membership not verified")
        })?;
        worst = worst
            .max(cert.check.generator_residual)
            .max(cert.check.sign_residual)
            .max(dev);
        ensure(worst <= TOL, || format!("M = {m}: residual {worst:e}"))?;
    }
    Ok(format!("M ∈ {{4,16,64,256}}: NotFound and ζ = g1, worst residual {worst:e}"))
}

fn divergence() -> Check {
    let levels = [4, 16, 64, 256, 1024, 4096];
    let log = refinement_study(&RefinementModel::LogCounterexample, &levels, TOL).map_err(|e| e.to_string())?;
    let err = log.max_error().unwrap_or(f64::INFINITY);
    ensure(log.rows.len() == levels.len() && err <= TOL, || format!("ln(2M) error {err:e}"))?;
    let control = refinement_study(&RefinementModel::BoundedControl, &levels, TOL).map_err(|e| e.to_string())?;
    let cerr = control.max_error().unwrap_or(f64::INFINITY);
    ensure(cerr <= TOL, || format!("control deviates from 1 by {cerr:e}"))?;
    Ok(format!("max |α* − ln 2M| = {err:e}, control max |α* − 1| = {cerr:e}"))
}

/// A random problem with integer data in `[−2, 2]` and a feasible integer
/// point. Weights are 1 or 2, so all pairings are exact integers.
#[derive(Debug, Clone)]
pub struct Instance {
    pub prob: Problem,
    pub xbar: SimpleFunction,
    pub grad: SimpleFunction,
}

pub fn random_instance(
    rng: &mut ChaCha8Rng,
    max_atoms: usize,
    max_ineq: usize,
    max_eq: usize,
    nondegenerate: bool,
) -> Instance {
    loop {
        if let Some(inst) = try_instance(rng, max_atoms, max_ineq, max_eq, nondegenerate) {
            return inst;
        }
    }
}

fn int(rng: &mut ChaCha8Rng, lo: i32, hi: i32) -> f64 {
    rng.random_range(lo..=hi) as f64
}

fn try_instance(
    rng: &mut ChaCha8Rng,
    max_atoms: usize,
    max_ineq: usize,
    max_eq: usize,
    nondegenerate: bool,
) -> Option<Instance> {
    let m = rng.random_range(1..=max_atoms);
    let weights: Vec<f64> = (0..m).map(|_| int(rng, 1, 2)).collect();
    let mut lower = Vec::with_capacity(m);
    let mut upper = Vec::with_capacity(m);
    let mut xbar = Vec::with_capacity(m);
    for _ in 0..m {
        let mut l = if rng.random_bool(0.25) { f64::NEG_INFINITY } else { int(rng, -2, 2) };
        let mut u = if rng.random_bool(0.25) { f64::INFINITY } else { int(rng, -2, 2) };
        if l > u {
            std::mem::swap(&mut l, &mut u);
        }
        if nondegenerate && l == u {
            if u < 2.0 {
                u += 1.0;
            } else {
                l -= 1.0;
            }
        }
        let lo = l.max(-2.0) as i32;
        let hi = u.min(2.0) as i32;
        let x = match rng.random_range(0..4) {
            0 if l.is_finite() => l,
            1 if u.is_finite() => u,
            _ => int(rng, lo, hi),
        };
        lower.push(l);
        upper.push(u);
        xbar.push(x);
    }
    let space = MeasureSpace::new(weights).ok()?;
    let xbar: SimpleFunction = xbar.into();
    let mut b = Problem::builder(space.clone()).bounds(ExtBound::new(lower).ok()?, ExtBound::new(upper).ok()?);
    for _ in 0..rng.random_range(0..=max_ineq) {
        let g: SimpleFunction = (0..m).map(|_| int(rng, -2, 2)).collect::<Vec<_>>().into();
        let v = space.pairing(&g, &xbar).ok()?;
        let a = if rng.random_bool(0.5) { v } else { int(rng, -2, 2) };
        if a < v || a.abs() > 2.0 {
            return None;
        }
        b = b.inequality(g, a);
    }
    for _ in 0..rng.random_range(0..=max_eq) {
        let h: SimpleFunction = (0..m).map(|_| int(rng, -2, 2)).collect::<Vec<_>>().into();
        let v = space.pairing(&h, &xbar).ok()?;
        if v.abs() > 2.0 {
            return None;
        }
        b = b.equality(h, v);
    }
    let grad: SimpleFunction = (0..m).map(|_| int(rng, -2, 2)).collect::<Vec<_>>().into();
    Some(Instance {
        prob: b.build().ok()?,
        xbar,
        grad,
    })
}

fn kkt_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut found, mut none) = (0, 0);
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let inst = random_instance(&mut rng, 4, 2, 1, false);
        let out = recover_multipliers_linear(&inst.prob, &inst.xbar, &inst.grad, TOL)
            .map_err(|e| format!("case {case}: {e}"))?;
        let oracle = multipliers_exist(&inst.prob, &inst.xbar, &inst.grad, TOL)
            .ok_or_else(|| format!("case {case}: oracle rejected the point"))?;
        let ours = out.status == KktStatus::MultipliersFound;
        ensure(ours == oracle, || format!("case {case}: solver {:?}, oracle {oracle}", out.status))?;
        if let Some(mult) = &out.multipliers {
            let rep = verify_stationarity(&inst.prob, &inst.xbar, &inst.grad, mult, TOL).map_err(|e| e.to_string())?;
            ensure(rep.max_residual <= 1e-8 && rep.signs_ok(), || {
                format!("case {case}: residual {:e}, signs ok {}", rep.max_residual, rep.signs_ok())
            })?;
            worst = worst.max(rep.max_residual);
            found += 1;
        } else {
            none += 1;
        }
    }
    Ok(format!("1000 cases agree ({found} with multipliers, {none} without), worst residual {worst:e}"))
}

fn slater_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut slater, mut certified) = (0, 0);
    for case in 0..300 {
        let inst = random_instance(&mut rng, 4, 2, 1, true);
        let found = find_slater(&inst.prob, TOL).map_err(|e| format!("case {case}: {e}"))?.found();
        let cert = build_no_slater_certificate(&inst.prob, &inst.xbar, TOL);
        ensure(found != cert.is_ok(), || {
            format!("case {case}: Slater found = {found}, certificate = {cert:?}")
        })?;
        if found {
            slater += 1;
        } else {
            certified += 1;
        }
    }
    Ok(format!("300 cases: {slater} with Slater point, {certified} with certificate"))
}

/// Null-space basis of the rows (in pairing coordinates), as columns.
fn null_space(rows: &[Vec<f64>], m: usize) -> Vec<Vec<f64>> {
    if rows.is_empty() {
        return (0..m)
            .map(|i| {
                let mut e = vec![0.0; m];
                e[i] = 1.0;
                e
            })
            .collect();
    }
    let a = DMatrix::from_fn(m.max(rows.len()), m, |i, k| if i < rows.len() { rows[i][k] } else { 0.0 });
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("requested V");
    let largest = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-10 * largest).count();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    order[rank..].iter().map(|&r| vt.row(r).iter().cloned().collect()).collect()
}

fn preprocess_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut implicit_total = 0;
    let mut dropped_total = 0;
    for case in 0..500 {
        let m = rng.random_range(1..=4);
        let space = MeasureSpace::new((0..m).map(|_| int(&mut rng, 1, 2)).collect()).map_err(|e| e.to_string())?;
        let x0: SimpleFunction = (0..m).map(|_| int(&mut rng, -2, 2)).collect::<Vec<_>>().into();
        let mut b = Problem::builder(space.clone());
        let n_ineq = rng.random_range(0..=3);
        for _ in 0..n_ineq {
            let g: SimpleFunction = (0..m).map(|_| int(&mut rng, -2, 2)).collect::<Vec<_>>().into();
            let v = space.pairing(&g, &x0).map_err(|e| e.to_string())?;
            let slack = [0.0, 0.0, 1.0, 2.0][rng.random_range(0..4)];
            b = b.inequality(g.clone(), v + slack);
            if rng.random_bool(0.4) {
                b = b.inequality(g.scale(-1.0), -v);
            }
        }
        let mut eqs: Vec<SimpleFunction> = Vec::new();
        for _ in 0..rng.random_range(0..=2) {
            let h: SimpleFunction = if !eqs.is_empty() && rng.random_bool(0.4) {
                let k = rng.random_range(0..eqs.len());
                eqs[k].scale(int(&mut rng, -2, 2))
            } else {
                (0..m).map(|_| int(&mut rng, -2, 2)).collect::<Vec<_>>().into()
            };
            let v = space.pairing(&h, &x0).map_err(|e| e.to_string())?;
            b = b.equality(h.clone(), v);
            eqs.push(h);
        }
        let prob = b.build().map_err(|e| e.to_string())?;
        let sys = build_mfcq_system(&prob, TOL).map_err(|e| format!("case {case}: {e}"))?;
        let tilde = sys.to_problem(&prob).map_err(|e| e.to_string())?;
        implicit_total += prob.inequalities().len() - sys.tilde_ineq.len();
        dropped_total += prob.equalities().len() + prob.inequalities().len()
            - sys.tilde_ineq.len()
            - sys.tilde_eq.len();

        // Independent rank check: the Gram matrix of the reduced equalities
        // must be nonsingular.
        let rows: Vec<Vec<f64>> = sys
            .tilde_eq
            .iter()
            .map(|e| e.h.iter().zip(space.weights()).map(|(h, w)| h * w).collect())
            .collect();
        if !rows.is_empty() {
            let gram: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| rows.iter().map(|s| r.iter().zip(s).map(|(a, b)| a * b).sum()).collect())
                .collect();
            ensure(solve_square(gram, vec![1.0; rows.len()]).is_some(), || {
                format!("case {case}: reduced equalities are dependent")
            })?;
        }
        if !sys.tilde_ineq.is_empty() {
            let margin = sys.witness_margin(&prob);
            ensure(margin > TOL, || format!("case {case}: witness margin {margin:e}"))?;
        }
        ensure(
            prob.check_feasible(&sys.witness, TOL).map_err(|e| e.to_string())?.feasible,
            || format!("case {case}: witness outside P"),
        )?;

        let hull = null_space(&rows, m);
        for s in 0..200 {
            let x: SimpleFunction = match s % 3 {
                0 | 1 => {
                    let base = if s % 3 == 0 { &sys.witness } else { &x0 };
                    let mut x = base.clone();
                    for v in &hull {
                        let c = rng.random_range(-2.0..=2.0);
                        for k in 0..m {
                            x[k] += c * v[k];
                        }
                    }
                    x
                }
                _ => (0..m).map(|_| int(&mut rng, -2, 2)).collect::<Vec<_>>().into(),
            };
            let a = prob.check_feasible(&x, TOL).map_err(|e| e.to_string())?.feasible;
            let t = tilde.check_feasible(&x, TOL).map_err(|e| e.to_string())?.feasible;
            ensure(a == t, || format!("case {case}: membership differs at {:?}", x.values()))?;
        }
    }
    Ok(format!(
        "500 systems × 200 points agree; {implicit_total} implicit equalities, {dropped_total} rows removed overall"
    ))
}

fn random_direction(rng: &mut ChaCha8Rng, m: usize) -> SimpleFunction {
    (0..m).map(|_| int(rng, -1, 1)).collect::<Vec<_>>().into()
}

fn cone_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_polar = f64::NEG_INFINITY;
    let mut polar_pairs = 0;
    for case in 0..1000 {
        let inst = random_instance(&mut rng, 4, 2, 1, false);
        let (prob, x) = (&inst.prob, &inst.xbar);
        let m = prob.m();
        let part = prob.regions(x, TOL).map_err(|e| e.to_string())?;
        let mut zk = SimpleFunction::zeros(m);
        let mut hk = SimpleFunction::zeros(m);
        for i in 0..m {
            let r = rng.random_range(0.0..2.0);
            let s = rng.random_range(-2.0..2.0);
            match part.atoms[i] {
                Activity::LowerActive => {
                    zk[i] = -r;
                    hk[i] = r.abs();
                }
                Activity::UpperActive => {
                    zk[i] = r;
                    hk[i] = -r.abs();
                }
                Activity::Free => hk[i] = s,
                Activity::BothActive => zk[i] = s,
            }
        }
        ensure(normal_k_contains(prob, x, &zk, 0.0).map_err(|e| e.to_string())?, || {
            format!("case {case}: generated ζ not in N_K")
        })?;
        let mut zp = SimpleFunction::zeros(m);
        for &i in &part.lin_active {
            zp = zp.axpy(rng.random_range(0.0..2.0), &prob.inequalities()[i].g);
        }
        for e in prob.equalities() {
            zp = zp.axpy(rng.random_range(-2.0..2.0), &e.h);
        }
        let pair = |z: &SimpleFunction, h: &SimpleFunction| prob.space().pairing_unchecked(z.values(), h.values());
        let v = pair(&zk, &hk);
        worst_polar = worst_polar.max(v);
        polar_pairs += 1;
        for _ in 0..4 {
            let h = random_direction(&mut rng, m);
            if tangent_p_contains(prob, x, &h, 0.0).map_err(|e| e.to_string())? {
                worst_polar = worst_polar.max(pair(&zp, &h));
                polar_pairs += 1;
                if tangent_k_contains(prob, x, &h, 0.0).map_err(|e| e.to_string())? {
                    worst_polar = worst_polar.max(pair(&zp.axpy(1.0, &zk), &h));
                    polar_pairs += 1;
                }
            }
        }
        ensure(worst_polar <= 1e-12, || format!("case {case}: ⟨ζ, h⟩ = {worst_polar:e}"))?;

        let h = random_direction(&mut rng, m).scale(rng.random_range(0.5..2.0));
        let tangent = tangent_k_contains(prob, x, &h, 0.0).map_err(|e| e.to_string())?;
        let radial = radial_k_witness(prob, x, &h).map_err(|e| e.to_string())?.is_some();
        ensure(tangent == radial, || format!("case {case}: T_K {tangent}, radial {radial}"))?;

        let d = random_direction(&mut rng, m);
        let both = tangent_k_contains(prob, x, &d, 0.0).map_err(|e| e.to_string())?
            && tangent_p_contains(prob, x, &d, 0.0).map_err(|e| e.to_string())?;
        let moved = x.axpy(1e-6, &d);
        let inside = prob.check_feasible(&moved, 1e-12).map_err(|e| e.to_string())?.feasible;
        ensure(both == inside, || format!("case {case}: T_K ∩ T_P {both}, feasible step {inside}"))?;
    }
    Ok(format!(
        "1000 cases each; {polar_pairs} polar pairs, max ⟨ζ, h⟩ = {worst_polar:e}"
    ))
}

fn closure() -> Check {
    let mut details = Vec::new();
    for m in [4, 16, 64] {
        let (prob, _, xbar) = RefinementModel::LogCounterexample
            .family()
            .instance(m)
            .map_err(|e| e.to_string())?;
        let cert = build_no_slater_certificate(&prob, &xbar, TOL).map_err(|e| e.to_string())?;
        let z = build_bad_functional(&prob, &xbar, &cert, BadProfile::Log).map_err(|e| e.to_string())?;
        let xi = z.scale(-1.0);
        let mut dists = Vec::new();
        for k in [1.0, 2.0, 4.0, 8.0, 16.0] {
            let xk = closure_sequence(&prob, &xbar, &cert.zeta, &xi, k, TOL).map_err(|e| e.to_string())?;
            let member = sum_nk_np_contains(&prob, &xbar, &xk, TOL).map_err(|e| e.to_string())?;
            ensure(matches!(member, SumMembership::Member(_)), || {
                format!("M = {m}, k = {k}: ξ_k not in N_K + N_P")
            })?;
            dists.push(xk.axpy(-1.0, &xi).max_norm());
        }
        ensure(dists.windows(2).all(|w| w[1] <= w[0] && (w[1] < w[0] || w[0] == 0.0)), || {
            format!("M = {m}: distances not decreasing: {dists:?}")
        })?;
        ensure(*dists.last().expect("nonempty") == 0.0, || {
            format!("M = {m}: distance at k = 16 is {:e}", dists[4])
        })?;
        details.push(format!("M = {m}: {:.3}→0", dists[0]));
    }
    Ok(details.join(", "))
}

fn nonlinear() -> Check {
    let problem = |lower: f64| -> crate::Result<Problem> {
        Problem::builder(MeasureSpace::uniform(1)?)
            .bounds(ExtBound::constant(1, lower), ExtBound::constant(1, 2.0))
            .nonlinear(Arc::new(QuadraticConstraint {
                q_matrix: vec![vec![2.0]],
                q: vec![0.0].into(),
                c: -1.0,
            }))
            .build()
    };
    let xbar: SimpleFunction = vec![1.0].into();
    let grad: SimpleFunction = vec![-2.0].into();
    let prob = problem(0.0).map_err(|e| e.to_string())?;
    let out = recover_multipliers_nonlinear(&prob, &xbar, &grad, TOL).map_err(|e| e.to_string())?;
    let gamma = out.multipliers.as_ref().map(|m| m.gamma.clone());
    ensure(gamma == Some(vec![1.0]), || format!("γ = {gamma:?}, expected [1]"))?;

    let out = recover_multipliers_nonlinear(&problem(1.0).map_err(|e| e.to_string())?, &xbar, &grad, TOL)
        .map_err(|e| e.to_string())?;
    ensure(out.status == KktStatus::NotApplicable, || format!("status {:?}, expected NotApplicable", out.status))?;

    let c = &prob.nonlinear()[0];
    let bad = c.gradient(prob.space(), &xbar).scale(1.01);
    let rejected = validate_gradient(prob.space(), c.as_ref(), &xbar, &bad);
    ensure(rejected.is_err(), || format!("corrupted gradient accepted: {rejected:?}"))?;
    Ok("γ = 1, NotApplicable without linearized Slater, corrupted gradient rejected".into())
}

fn random_lp(rng: &mut ChaCha8Rng) -> LinearProgram {
    let n = rng.random_range(1..=3);
    let mut lp = LinearProgram::new(n).maximize((0..n).map(|_| int(rng, -3, 3)).collect());
    for _ in 0..rng.random_range(0..=4) {
        let kind = [RowKind::Le, RowKind::Le, RowKind::Ge, RowKind::Eq][rng.random_range(0..4)];
        lp.add_row((0..n).map(|_| int(rng, -3, 3)).collect(), kind, int(rng, -3, 3));
    }
    for j in 0..n {
        let l = if rng.random_bool(0.5) { int(rng, -3, 0) } else { f64::NEG_INFINITY };
        let u = if rng.random_bool(0.5) { int(rng, 0, 3) } else { f64::INFINITY };
        lp.set_bounds(j, l, u);
    }
    lp
}

fn lp_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let opts = LpOptions::default();
    let mut counts = [0usize; 3];
    for case in 0..2000 {
        let lp = random_lp(&mut rng);
        let out = lp::solve(&lp, &opts).map_err(|e| format!("case {case}: {e}"))?;
        lp::verify_outcome(&lp, &out, opts.feas_tol).map_err(|e| format!("case {case}: {e}"))?;
        match (out.status, solve_lp(&lp, 1e-9)) {
            (LpStatus::Optimal, OracleStatus::Optimal(v)) => {
                ensure((out.objective - v).abs() <= 1e-9, || {
                    format!("case {case}: value {} vs oracle {v}", out.objective)
                })?;
                counts[0] += 1;
            }
            (LpStatus::Infeasible, OracleStatus::Infeasible) => {
                ensure(out.farkas.is_some(), || format!("case {case}: no Farkas ray"))?;
                counts[1] += 1;
            }
            (LpStatus::Unbounded, OracleStatus::Unbounded) => counts[2] += 1,
            (ours, theirs) => return Err(format!("case {case}: solver {ours:?}, oracle {theirs:?}")),
        }
    }
    Ok(format!(
        "2000 LPs agree: {} optimal, {} infeasible (Farkas verified), {} unbounded",
        counts[0], counts[1], counts[2]
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tampered_tolerance_is_detected() {
        assert!(run_criterion(0, TOL).passed);
        assert!(!run_criterion(0, 10.0).passed);
    }

    #[test]
    fn random_instances_are_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let inst = random_instance(&mut rng, 4, 2, 1, true);
            assert!(inst.prob.check_feasible(&inst.xbar, 0.0).unwrap().feasible);
            assert!(inst.prob.has_nondegenerate_box());
        }
    }
}
