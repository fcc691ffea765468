use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use slaterkit::acceptance::{random_instance, Instance};
use slaterkit::certificates::build_no_slater_certificate;
use slaterkit::cones::{
    closure_sequence, normal_k_contains, radial_k_witness, sum_nk_np_contains, tangent_k_contains, SumMembership,
};
use slaterkit::kkt::{recover_multipliers_linear, verify_stationarity, KktStatus};
use slaterkit::model::Activity;
use slaterkit::preprocess::build_mfcq_system;
use slaterkit::slater::{box_margin, density_construction, find_slater, SlaterPoint, SlaterStatus};
use slaterkit::{Error, ExtBound, Exponent, MeasureSpace, Problem, SimpleFunction};

const TOL: f64 = 1e-9;

fn instance(seed: u64, nondegenerate: bool) -> Instance {
    random_instance(&mut ChaCha8Rng::seed_from_u64(seed), 5, 3, 2, nondegenerate)
}

fn direction(seed: u64, m: usize) -> SimpleFunction {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    (0..m).map(|_| rng.random_range(-2..=2) as f64).collect::<Vec<_>>().into()
}

fn rebuild_scaled(prob: &Problem, c: f64) -> Problem {
    let mut b = Problem::builder(prob.space().scaled(c).unwrap())
        .exponent(prob.exponent())
        .bounds(prob.lower().clone(), prob.upper().clone());
    for g in prob.inequalities() {
        b = b.inequality(g.g.clone(), g.a * c);
    }
    for h in prob.equalities() {
        b = b.equality(h.h.clone(), h.b * c);
    }
    b.build().unwrap()
}

fn weights() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..4.0, 1..8)
}

proptest! {
    #[test]
    fn holder_inequality(w in weights(), p in 1.0f64..6.0, seed in any::<u64>()) {
        let m = w.len();
        let space = MeasureSpace::new(w).unwrap();
        let g = direction(seed, m);
        let x = direction(seed.wrapping_add(1), m);
        let p = Exponent::new(p).unwrap();
        let lhs = space.pairing(&g, &x).unwrap().abs();
        let rhs = space.lp_norm(&g, p.conjugate()).unwrap() * space.lp_norm(&x, p).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn regions_partition_atoms(seed in any::<u64>()) {
        let inst = instance(seed, false);
        let part = inst.prob.box_regions(&inst.xbar, TOL).unwrap();
        let m = inst.prob.m();
        let mut seen = vec![0; m];
        for i in part.both_active().into_iter()
            .chain(part.lower_active())
            .chain(part.free())
            .chain(part.upper_active())
        {
            seen[i] += 1;
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        for i in 0..m {
            let (l, u, x) = (inst.prob.lower()[i], inst.prob.upper()[i], inst.xbar[i]);
            if l == u {
                prop_assert_eq!(part.atoms[i], Activity::BothActive);
            }
            if x > l + 1.0 && x < u - 1.0 {
                prop_assert_eq!(part.atoms[i], Activity::Free);
            }
        }
    }

    #[test]
    fn feasibility_is_monotone_in_tol(seed in any::<u64>(), t in -12i32..0, k in 1i32..6) {
        let inst = instance(seed, false);
        let x = inst.xbar.axpy(1e-6, &direction(seed, inst.prob.m()));
        let small = 10f64.powi(t);
        let large = small * 10f64.powi(k);
        if inst.prob.check_feasible(&x, small).unwrap().feasible {
            prop_assert!(inst.prob.check_feasible(&x, large).unwrap().feasible);
        }
    }

    #[test]
    fn normal_and_tangent_cones_are_polar(seed in any::<u64>()) {
        let inst = instance(seed, false);
        let m = inst.prob.m();
        let zeta = direction(seed, m);
        let h = direction(seed.wrapping_mul(3), m);
        if normal_k_contains(&inst.prob, &inst.xbar, &zeta, TOL).unwrap()
            && tangent_k_contains(&inst.prob, &inst.xbar, &h, TOL).unwrap()
        {
            prop_assert!(inst.prob.pairing(&zeta, &h).unwrap() <= TOL);
        }
    }

    #[test]
    fn radial_and_tangent_cones_agree_on_the_box(seed in any::<u64>()) {
        let inst = instance(seed, false);
        let h = direction(seed, inst.prob.m());
        let radial = radial_k_witness(&inst.prob, &inst.xbar, &h).unwrap();
        let tangent = tangent_k_contains(&inst.prob, &inst.xbar, &h, 0.0).unwrap();
        prop_assert_eq!(radial.is_some(), tangent);
        if let Some(t0) = radial {
            let t = if t0.is_finite() { t0 } else { 1.0 };
            prop_assert!(inst.prob.in_box(&inst.xbar.axpy(t, &h), 0.0));
        }
    }

    #[test]
    fn preprocessing_is_idempotent(seed in any::<u64>()) {
        let inst = instance(seed, false);
        let sys = build_mfcq_system(&inst.prob, TOL).unwrap();
        let tilde = sys.to_problem(&inst.prob).unwrap();
        let again = build_mfcq_system(&tilde, TOL).unwrap();
        prop_assert_eq!(again.tilde_ineq.len(), sys.tilde_ineq.len());
        prop_assert_eq!(again.tilde_eq.len(), sys.tilde_eq.len());
        prop_assert!(again.witness_margin(&tilde) > TOL);
        let xbar_ok = tilde.check_feasible(&inst.xbar, 1e-7).unwrap().feasible;
        prop_assert!(xbar_ok);
    }

    #[test]
    fn slater_points_are_genuine(seed in any::<u64>()) {
        let inst = instance(seed, false);
        let rep = find_slater(&inst.prob, TOL).unwrap();
        if let Some(x) = rep.point() {
            let check = SlaterPoint::evaluate(&inst.prob, x).unwrap();
            prop_assert!(check.passes(TOL));
            prop_assert!(box_margin(&inst.prob, x) > TOL);
        }
    }

    #[test]
    fn slater_status_is_invariant_under_weight_scaling(seed in any::<u64>(), k in -4i32..=4) {
        let inst = instance(seed, false);
        let scaled = rebuild_scaled(&inst.prob, 2f64.powi(k));
        let a = find_slater(&inst.prob, TOL).unwrap().status;
        let b = find_slater(&scaled, TOL).unwrap().status;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn multipliers_satisfy_stationarity(seed in any::<u64>()) {
        let inst = instance(seed, false);
        let out = recover_multipliers_linear(&inst.prob, &inst.xbar, &inst.grad, TOL).unwrap();
        match out.status {
            KktStatus::MultipliersFound => {
                let mult = out.multipliers.unwrap();
                let rep = verify_stationarity(&inst.prob, &inst.xbar, &inst.grad, &mult, TOL).unwrap();
                prop_assert!(rep.passes(1e-7), "{:?}", rep);
            }
            KktStatus::NoMultipliers => {
                let d = out.descent.unwrap();
                prop_assert!(tangent_k_contains(&inst.prob, &inst.xbar, &d, 1e-7).unwrap());
                prop_assert!(inst.prob.pairing(&inst.grad, &d).unwrap() < -TOL);
            }
            KktStatus::NotApplicable => prop_assert!(false, "linear path cannot be NotApplicable"),
        }
    }

    #[test]
    fn certificate_exists_exactly_without_slater_point(seed in any::<u64>()) {
        let inst = instance(seed, true);
        let slater = find_slater(&inst.prob, TOL).unwrap();
        match build_no_slater_certificate(&inst.prob, &inst.xbar, TOL) {
            Ok(cert) => {
                prop_assert_eq!(slater.status, SlaterStatus::NotFound);
                prop_assert!(cert.check.normal_p && cert.check.minus_normal_k);
                prop_assert!((cert.zeta.max_norm() - 1.0).abs() < 1e-9);
            }
            Err(Error::CertificateNotFound(_)) => prop_assert_eq!(slater.status, SlaterStatus::Found),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn closure_sequence_enters_the_sum_and_converges(seed in any::<u64>()) {
        let inst = instance(seed, true);
        let Ok(cert) = build_no_slater_certificate(&inst.prob, &inst.xbar, TOL) else {
            return Ok(());
        };
        let target = direction(seed, inst.prob.m());
        let xi: SimpleFunction = (0..inst.prob.m())
            .map(|i| if cert.zeta[i] == 0.0 { 0.0 } else { target[i] })
            .collect::<Vec<_>>()
            .into();
        let exact = (0..inst.prob.m())
            .filter(|&i| cert.zeta[i] != 0.0)
            .fold(1.0f64, |k, i| k.max((xi[i] / cert.zeta[i]).abs()));
        let mut last = f64::INFINITY;
        for k in [1.0, 4.0, 16.0, 64.0, exact.max(64.0)] {
            let xk = closure_sequence(&inst.prob, &inst.xbar, &cert.zeta, &xi, k, TOL).unwrap();
            let err = xk.axpy(-1.0, &xi).max_norm();
            prop_assert!(err <= last + 1e-12);
            last = err;
            let member = sum_nk_np_contains(&inst.prob, &inst.xbar, &xk, 1e-7).unwrap();
            prop_assert!(matches!(member, SumMembership::Member(_)));
        }
        prop_assert!(last == 0.0);
    }
}

#[test]
fn density_construction_on_random_boxes() {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut infinite = 0;
    for _ in 0..1000 {
        let m = rng.random_range(1..=6);
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        let mut x = Vec::new();
        for _ in 0..m {
            let l = if rng.random_bool(0.3) { f64::NEG_INFINITY } else { rng.random_range(-3.0..1.0) };
            let u = if rng.random_bool(0.3) {
                f64::INFINITY
            } else if l.is_finite() {
                l + rng.random_range(1e-3..4.0)
            } else {
                rng.random_range(-1.0..3.0)
            };
            infinite += usize::from(!l.is_finite() || !u.is_finite());
            let v = match rng.random_range(0..3) {
                0 if l.is_finite() => l,
                1 if u.is_finite() => u,
                _ if l.is_finite() && u.is_finite() => l + (u - l) * rng.random_range(0.0..1.0),
                _ if l.is_finite() => l + rng.random_range(0.0..2.0),
                _ if u.is_finite() => u - rng.random_range(0.0..2.0),
                _ => rng.random_range(-2.0..2.0),
            };
            lower.push(l);
            upper.push(u);
            x.push(v);
        }
        let w: SimpleFunction = (0..m).map(|_| rng.random_range(0.01..3.0)).collect::<Vec<_>>().into();
        let prob = Problem::builder(MeasureSpace::uniform(m).unwrap())
            .bounds(ExtBound::new(lower.clone()).unwrap(), ExtBound::new(upper.clone()).unwrap())
            .build()
            .unwrap();
        let x: SimpleFunction = x.into();
        let y = density_construction(&prob, &x, Some(&w)).unwrap();
        for i in 0..m {
            assert!(lower[i] < y[i] && y[i] < upper[i], "atom {i}: {} not inside ({}, {})", y[i], lower[i], upper[i]);
            if x[i] != lower[i] && x[i] != upper[i] {
                assert_eq!(y[i], x[i]);
            }
        }
    }
    assert!(infinite > 100);
}
