use shellscatter::evolution::*;
use shellscatter::quadrature::Tolerance;
use shellscatter::testspace::{Bump, TestFunction};
use shellscatter::transforms::{forward, forward_sampled, PlanOptions, TransformKind, TransformPlan};
use shellscatter::{PotentialConfig, Sign, C64};

fn packet(cfg: &PotentialConfig) -> TestFunction {
    TestFunction::new(vec![Bump::new(6.5, 3.5, C64::new(1.0, 0.4))], 12.0, cfg).unwrap()
}

fn tol() -> Tolerance {
    Tolerance::relative(1e-13)
}

#[test]
fn zero_time_is_identity() {
    let cfg = PotentialConfig::default();
    let f = packet(&cfg);
    let norm = f.l2_norm(tol()).unwrap();
    let plan = TransformPlan::for_function(&f, &cfg, PlanOptions::round_trip()).unwrap();
    for (generator, sign) in [(Generator::Full, Sign::Plus), (Generator::Full, Sign::Minus), (Generator::Free, Sign::Plus)] {
        let req = EvolutionRequest { state: EvolutionState::Function(f.clone()), time: 0.0, generator, sign };
        let s = evolve(&req, &plan, &cfg, 1e-6).unwrap();
        assert!(s.distance_to(&f) < 1e-6 * norm, "{generator:?} {sign:?}");
    }
}

#[test]
fn group_law_through_sampled_state() {
    let cfg = PotentialConfig::default();
    let f = packet(&cfg);
    let plan = TransformPlan::for_function(&f, &cfg, PlanOptions { time_span: 1.0, ..PlanOptions::round_trip() }).unwrap();
    let (t1, t2) = (-0.5, 1.0);
    let mid = evolve(&EvolutionRequest::new(&f, t2), &plan, &cfg, 1e-6).unwrap();
    let p = forward_sampled(TransformKind::Plus, &mid, plan.energy.clone(), &cfg).unwrap();
    let req = EvolutionRequest { state: EvolutionState::Profile(p), time: t1, generator: Generator::Full, sign: Sign::Plus };
    let composed = evolve(&req, &plan, &cfg, 1e-6).unwrap();
    let direct = evolve(&EvolutionRequest::new(&f, t1 + t2), &plan, &cfg, 1e-6).unwrap();
    let err = composed.distance(&direct).unwrap() / direct.norm();
    assert!(err < 2e-6, "{err}");
}

#[test]
fn group_law_through_profile_at_long_times() {
    let cfg = PotentialConfig::default();
    let f = packet(&cfg);
    let plan = TransformPlan::for_function(&f, &cfg, PlanOptions::evolution(10.0)).unwrap();
    let base = forward(TransformKind::Plus, &f, plan.energy.clone(), &cfg).unwrap();
    let mid = evolve_profile(&base, -10.0, &cfg);
    let req = EvolutionRequest { state: EvolutionState::Profile(mid), time: 20.0, generator: Generator::Full, sign: Sign::Plus };
    let composed = evolved_profile(&req, &plan, &cfg).unwrap();
    let direct = evolve_profile(&base, 10.0, &cfg);
    assert!(composed.distance(&direct).unwrap() < 1e-12 * direct.norm());
}

#[test]
fn norm_and_phase_laws() {
    let cfg = PotentialConfig::default();
    let f = packet(&cfg);
    let norm = f.l2_norm(tol()).unwrap();
    for t in [1.0f64, -1.0] {
        let plan = TransformPlan::for_function(&f, &cfg, PlanOptions::evolution(t.abs())).unwrap();
        for sign in [Sign::Plus, Sign::Minus] {
            let req = EvolutionRequest { state: EvolutionState::Function(f.clone()), time: t, generator: Generator::Full, sign };
            let s = evolve(&req, &plan, &cfg, 1e-6).unwrap();
            assert!((s.norm() - norm).abs() < 1e-6 * norm);
        }
        for (generator, sign) in [(Generator::Full, Sign::Plus), (Generator::Full, Sign::Minus), (Generator::Free, Sign::Plus)] {
            let pc = ket_phase_check(generator, sign, 5.0, t, &f, &plan, &cfg, tol()).unwrap();
            assert!(pc.relative() < 1e-6, "{generator:?} {sign:?} t={t}: {pc:?}");
        }
    }
    let plan = TransformPlan::for_function(&f, &cfg, PlanOptions::evolution(1.0)).unwrap();
    let pc = ket_phase_check(Generator::Full, Sign::Plus, 5.0, 0.0, &f, &plan, &cfg, tol()).unwrap();
    assert_eq!((pc.ket, pc.bra), (0.0, 0.0));
}

#[test]
fn both_bases_give_the_same_state() {
    let cfg = PotentialConfig::default();
    let f = packet(&cfg);
    let plan = TransformPlan::for_function(&f, &cfg, PlanOptions::evolution(1.0)).unwrap();
    let plus = evolve(&EvolutionRequest::new(&f, 1.0), &plan, &cfg, 1e-6).unwrap();
    let req = EvolutionRequest { sign: Sign::Minus, ..EvolutionRequest::new(&f, 1.0) };
    let minus = evolve(&req, &plan, &cfg, 1e-6).unwrap();
    assert!(plus.distance(&minus).unwrap() < 2e-6 * plus.norm());
}

#[test]
fn hunziker_table() {
    let cfg = PotentialConfig::default();
    let f = packet(&cfg);
    let plan = TransformPlan::for_function(&f, &cfg, PlanOptions::evolution(2.0)).unwrap();
    let rows = hunziker_diagnostic(&f, 1, &[0.0, 1.0, 2.0], &plan, &cfg).unwrap();
    let d1 = f.dn_norm(1, &cfg, tol()).unwrap();
    assert!((rows[0].ratio - d1).abs() < 1e-5 * d1, "{} vs {d1}", rows[0].ratio);
    assert!(fitted_constant(&rows, d1).is_finite());
    let flat = hunziker_diagnostic(&f, 0, &[0.0, 1.0, 2.0], &plan, &cfg).unwrap();
    for r in &flat {
        assert!((r.ratio - flat[0].ratio).abs() < 1e-6 * flat[0].ratio);
    }
}
