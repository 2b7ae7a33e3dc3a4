//! A self-check suite over a configuration, producing a machine-readable report.
//!
//! All test states are fixed and placed relative to the shell, so a report is
//! a deterministic function of the configuration.

use serde::Serialize;

use crate::coeffs::{compute_coefficients, s_matrix, Sign};
use crate::eigenfuncs::{chi_pm, f_pm, normalization, ode_oracle, wave, WaveKind};
use crate::error::Result;
use crate::evolution::{evolve, EvolutionRequest, EvolutionState, Generator};
use crate::green::{extrapolated_measure_density, green_eigen_form, green_theorem1, resolvent_residual};
use crate::quadrature::Tolerance;
use crate::scattering::{ls_residual, moller, s_matrix_element, s_multiply, scattering_plan};
use crate::testspace::{continuity_bound, Bump, TestFunction};
use crate::transforms::{bra_action, forward, inverse_on, EnergyGrid, PlanOptions, TransformKind, TransformPlan};
use crate::units::{ComplexEnergy, PotentialConfig, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Full,
    /// `|S| = 1`, Parseval, Moller isometry and conservation of the norm under evolution.
    UnitarityOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    /// The identity being tested.
    pub paper_ref: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub checks: Vec<Check>,
    pub summary: Summary,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.summary.failed == 0
    }
}

struct CheckDef {
    name: &'static str,
    identity: &'static str,
    tolerance: f64,
    unitarity: bool,
    run: fn(&PotentialConfig) -> Result<f64>,
}

const CHECKS: &[CheckDef] = &[
    CheckDef { name: "s_matrix_unimodular", identity: "|S(E)| = 1", tolerance: 1e-12, unitarity: true, run: unimodular },
    CheckDef { name: "matching", identity: "value and slope continuous at r = a and r = b", tolerance: 1e-12, unitarity: false, run: matching },
    CheckDef { name: "closed_forms_vs_ode", identity: "closed forms solve -u''/c2 + V u = E u", tolerance: 1e-8, unitarity: false, run: closed_forms },
    CheckDef { name: "chi_relations", identity: "chi+ = S chi- and chi- = -(J4/J3) chi+", tolerance: 1e-12, unitarity: false, run: chi_relations },
    CheckDef { name: "green_forms", identity: "c2 chi(r<) f(r>) / W equals the eigenfunction form", tolerance: 1e-12, unitarity: false, run: green_forms },
    CheckDef { name: "resolvent_residual", identity: "(E - h) R(E) f = f", tolerance: 1e-6, unitarity: false, run: resolvent },
    CheckDef { name: "spectral_density", identity: "rho_11((E1, E2)) = E2 - E1", tolerance: 1e-3, unitarity: false, run: density },
    CheckDef { name: "parseval", identity: "||U f|| = ||f|| for U+, U-, U0", tolerance: 1e-6, unitarity: true, run: parseval },
    CheckDef { name: "round_trip", identity: "U^dagger U f = f for U+, U-, U0", tolerance: 1e-6, unitarity: false, run: round_trip },
    CheckDef { name: "diagonalization", identity: "U+-(H f)(E) = E (U+- f)(E)", tolerance: 1e-6, unitarity: false, run: diagonalization },
    CheckDef { name: "s_relation", identity: "(U- g)(E) = S(E) (U+ g)(E)", tolerance: 1e-8, unitarity: false, run: s_relation },
    CheckDef { name: "s_matrix_element", identity: "(psi-, phi+) = int conj(psi-hat) S phi-hat dE", tolerance: 1e-6, unitarity: false, run: element },
    CheckDef { name: "moller_isometry", identity: "||Omega+- f|| = ||f||", tolerance: 1e-6, unitarity: true, run: moller_isometry },
    CheckDef { name: "ls_residual", identity: "<phi|E+-> = <phi|E> + <phi|G0+- V|E+->", tolerance: 1e-5, unitarity: false, run: lippmann_schwinger },
    CheckDef { name: "evolution_norm", identity: "||exp(-iHt) f|| = ||f||", tolerance: 1e-6, unitarity: true, run: evolution_norm },
    CheckDef { name: "continuity_bound", identity: "|<phi|E+>| <= C+(E) ||phi||_{1,0}", tolerance: 1.0, unitarity: false, run: continuity },
];

/// Runs the selected checks. Numeric failures inside a check are reported as
/// a failed check and do not abort the run.
pub fn run_suite(cfg: &PotentialConfig, suite: Suite) -> Report {
    let checks: Vec<Check> = CHECKS
        .iter()
        .filter(|s| suite == Suite::Full || s.unitarity)
        .map(|s| {
            let (value, error) = match (s.run)(cfg) {
                Ok(v) => (v, None),
                Err(e) => (f64::NAN, Some(e.to_string())),
            };
            let pass = if s.name == "continuity_bound" { value <= s.tolerance } else { value < s.tolerance };
            log::info!("{}: {value:e} (tolerance {:e})", s.name, s.tolerance);
            Check { name: s.name.into(), paper_ref: s.identity.into(), value, tolerance: s.tolerance, pass, error }
        })
        .collect();
    let passed = checks.iter().filter(|c| c.pass).count();
    let summary = Summary { total: checks.len(), passed, failed: checks.len() - passed };
    Report { checks, summary }
}

fn tol() -> Tolerance {
    Tolerance::relative(1e-12)
}

fn log_energies(n: usize) -> Result<Vec<f64>> {
    Ok(EnergyGrid::log_spaced(1e-3, 1e3, n)?.energies)
}

/// One bump inside, one across the middle of the shell, one outside.
fn probe_states(cfg: &PotentialConfig) -> Result<Vec<TestFunction>> {
    let (a, b) = (cfg.a, cfg.b);
    let r_max = b + 6.0;
    Ok(vec![
        TestFunction::new(vec![Bump::new(0.5 * a, 0.4 * a, C64::new(1.0, 0.0))], r_max, cfg)?,
        TestFunction::new(
            vec![Bump::new(0.5 * (a + b), 0.4 * (b - a), C64::new(0.3, -1.0)), Bump::new(b + 3.0, 1.5, C64::new(0.5, 0.5))],
            r_max,
            cfg,
        )?,
        TestFunction::new(vec![Bump::new(b + 2.0, 1.5, C64::new(-0.5, 0.5))], r_max, cfg)?,
    ])
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

fn unimodular(cfg: &PotentialConfig) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for e in log_energies(200)? {
        worst = worst.max((s_matrix(e, cfg)?.norm() - 1.0).abs());
    }
    Ok(worst)
}

fn matching(cfg: &PotentialConfig) -> Result<f64> {
    let kinds = [WaveKind::Regular, WaveKind::ChiPlus, WaveKind::ChiMinus, WaveKind::FPlus, WaveKind::FMinus, WaveKind::Sigma2, WaveKind::Free];
    let mut worst: f64 = 0.0;
    for e in log_energies(50)? {
        for kind in kinds {
            worst = worst.max(wave(kind, e.into(), cfg)?.continuity_mismatch());
        }
    }
    Ok(worst)
}

fn closed_forms(cfg: &PotentialConfig) -> Result<f64> {
    let top = 3.0 * cfg.b;
    let mut worst: f64 = 0.0;
    for e in [0.5, 3.0, 12.0] {
        let energy: ComplexEnergy = e.into();
        let step = 1e-3f64.min(0.01 / (cfg.c2() * e).sqrt());
        for (w, outside) in [(wave(WaveKind::Regular, energy, cfg)?, false), (f_pm(Sign::Plus, energy, cfg)?, true)] {
            let (start, end) = if outside { (top, 0.0) } else { (0.0, top) };
            let (u, du) = w.eval(start);
            let s = ode_oracle(energy, cfg, start, u, du, end, step, 1e-10)?;
            let scale = max_of(s.u.iter().map(|u| u.norm()));
            worst = worst.max(max_of(s.r.iter().zip(&s.u).map(|(&r, &u)| (u - w.value(r)).norm())) / scale);
        }
    }
    Ok(worst)
}

fn chi_relations(cfg: &PotentialConfig) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for e in log_energies(12)? {
        let co = compute_coefficients(e.into(), cfg)?;
        let plus = chi_pm(Sign::Plus, e.into(), cfg)?;
        let minus = chi_pm(Sign::Minus, e.into(), cfg)?;
        let n = normalization(e, cfg)?;
        for i in 1..=30 {
            let r = 3.0 * cfg.b * i as f64 / 30.0;
            let (p, m) = (plus.value(r), minus.value(r));
            let scale = p.norm().max(n);
            worst = worst.max((p - co.s_matrix() * m).norm() / scale);
            worst = worst.max((m + co.j4() / co.j3() * p).norm() / scale);
        }
    }
    Ok(worst)
}

fn green_forms(cfg: &PotentialConfig) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (re, im) in [(3.0, 2.0), (-2.0, 1.5), (-0.7, -3.0), (9.0, -0.4)] {
        for (r, s) in [(0.3, 0.7), (1.4, 0.5), (2.5, 1.7), (5.0, 5.5)] {
            let e = ComplexEnergy::new(re, im);
            let g1 = green_theorem1(r * cfg.b / 2.0, s * cfg.b / 2.0, e, cfg)?;
            let g2 = green_eigen_form(r * cfg.b / 2.0, s * cfg.b / 2.0, e, cfg)?;
            worst = worst.max((g1 - g2).norm() / g1.norm());
        }
    }
    Ok(worst)
}

fn resolvent(cfg: &PotentialConfig) -> Result<f64> {
    let f = TestFunction::new(vec![Bump::new(cfg.b + 2.0, 1.5, C64::new(1.0, 0.5))], cfg.b + 6.0, cfg)?;
    resolvent_residual(&f, ComplexEnergy::new(3.0, 2.0), cfg, 0.01, tol())
}

fn density(cfg: &PotentialConfig) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for e in [1.0, 5.0, 20.0] {
        worst = worst.max((extrapolated_measure_density(e, &[1e-2, 1e-3, 1e-4], cfg)? - 1.0).abs());
    }
    Ok(worst)
}

const KINDS: [TransformKind; 3] = [TransformKind::Plus, TransformKind::Minus, TransformKind::Zero];

fn parseval(cfg: &PotentialConfig) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for f in probe_states(cfg)? {
        let norm = f.l2_norm(tol())?;
        let plan = TransformPlan::for_function(&f, cfg, PlanOptions::round_trip())?;
        for kind in KINDS {
            worst = worst.max((forward(kind, &f, plan.energy.clone(), cfg)?.norm() - norm).abs() / norm);
        }
    }
    Ok(worst)
}

fn round_trip(cfg: &PotentialConfig) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for f in probe_states(cfg)? {
        let norm = f.l2_norm(tol())?;
        let plan = TransformPlan::for_function(&f, cfg, PlanOptions::round_trip())?;
        for kind in KINDS {
            let p = forward(kind, &f, plan.energy.clone(), cfg)?;
            worst = worst.max(inverse_on(&p, plan.radial.clone(), cfg, 1e-6)?.distance_to(&f) / norm);
        }
    }
    Ok(worst)
}

fn diagonalization(cfg: &PotentialConfig) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for f in probe_states(cfg)? {
        let plan = TransformPlan::for_function(&f, cfg, PlanOptions::round_trip())?;
        let hf = f.apply_h(cfg, 1)?;
        for kind in [TransformKind::Plus, TransformKind::Minus] {
            let lhs = forward(kind, &hf, plan.energy.clone(), cfg)?;
            let rhs = forward(kind, &f, plan.energy.clone(), cfg)?.multiply(|e| C64::new(e, 0.0));
            worst = worst.max(lhs.distance(&rhs)? / lhs.norm());
        }
    }
    Ok(worst)
}

fn s_relation(cfg: &PotentialConfig) -> Result<f64> {
    let grid = std::sync::Arc::new(EnergyGrid::log_spaced(1e-3, 1e3, 200)?);
    let mut worst: f64 = 0.0;
    for f in probe_states(cfg)? {
        let plus = forward(TransformKind::Plus, &f, grid.clone(), cfg)?;
        let minus = forward(TransformKind::Minus, &f, grid.clone(), cfg)?;
        let rotated = s_multiply(&plus, cfg)?.with_kind(TransformKind::Minus);
        worst = worst.max(minus.max_difference(&rotated)? / max_of(plus.values.iter().map(|v| v.norm())));
    }
    Ok(worst)
}

fn element(cfg: &PotentialConfig) -> Result<f64> {
    let states = probe_states(cfg)?;
    let mut worst: f64 = 0.0;
    for (psi, phi) in [(&states[0], &states[1]), (&states[1], &states[2]), (&states[2], &states[2])] {
        let w = psi.bumps().iter().chain(phi.bumps()).map(|b| b.halfwidth).fold(f64::INFINITY, f64::min);
        let plan = TransformPlan::build(psi.support_end().max(phi.support_end()), w, cfg, PlanOptions::round_trip())?;
        let el = s_matrix_element(psi, phi, &plan, cfg, tol())?;
        worst = worst.max((el.energy_integral - el.direct).norm() / (psi.l2_norm(tol())? * phi.l2_norm(tol())?));
    }
    Ok(worst)
}

fn moller_isometry(cfg: &PotentialConfig) -> Result<f64> {
    let f = TestFunction::new(vec![Bump::new(cfg.b + 3.0, 2.5, C64::new(1.0, 0.3))], cfg.b + 6.0, cfg)?;
    let norm = f.l2_norm(tol())?;
    let plan = scattering_plan(&[&f], cfg)?;
    let mut worst: f64 = 0.0;
    for sign in [Sign::Plus, Sign::Minus] {
        worst = worst.max((moller(sign, &f, &plan, cfg, 1e-6)?.norm() - norm).abs() / norm);
    }
    Ok(worst)
}

fn lippmann_schwinger(cfg: &PotentialConfig) -> Result<f64> {
    let phi = &probe_states(cfg)?[1];
    let mut worst: f64 = 0.0;
    for e in [2.0, 5.0, 10.0] {
        for sign in [Sign::Plus, Sign::Minus] {
            worst = worst.max(ls_residual(sign, e, phi, cfg, tol())?.relative());
        }
    }
    Ok(worst)
}

fn evolution_norm(cfg: &PotentialConfig) -> Result<f64> {
    let f = TestFunction::new(vec![Bump::new(cfg.b + 4.5, 3.5, C64::new(1.0, 0.4))], cfg.b + 10.0, cfg)?;
    let norm = f.l2_norm(tol())?;
    let plan = TransformPlan::for_function(&f, cfg, PlanOptions::evolution(1.0))?;
    let mut worst: f64 = 0.0;
    for (generator, sign) in [(Generator::Full, Sign::Plus), (Generator::Full, Sign::Minus), (Generator::Free, Sign::Plus)] {
        for t in [1.0, -1.0] {
            let req = EvolutionRequest { state: EvolutionState::Function(f.clone()), time: t, generator, sign };
            worst = worst.max((evolve(&req, &plan, cfg, 1.0)?.norm() - norm).abs() / norm);
        }
    }
    Ok(worst)
}

fn continuity(cfg: &PotentialConfig) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for f in probe_states(cfg)? {
        let bound = f.phi_norm(1, 0, cfg, tol())?;
        for e in [0.05, 0.7, 3.0, 15.0, 60.0] {
            worst = worst.max(bra_action(TransformKind::Plus, e, &f, cfg, tol())?.norm() / (continuity_bound(e, cfg)? * bound));
        }
    }
    Ok(worst)
}
