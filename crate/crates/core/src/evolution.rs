//! Time evolution in the energy representation: transform, multiply by
//! `exp(-i E t / hbar)`, transform back.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::coeffs::Sign;
use crate::error::{Error, Result};
use crate::quadrature::Tolerance;
use crate::radial::RadialSamples;
use crate::testspace::{continuity_bound, TestFunction};
use crate::transforms::{forward, inverse_on, ket_action, EnergyProfile, TransformKind, TransformPlan};
use crate::units::{PotentialConfig, C64, I};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    Full,
    Free,
}

impl std::str::FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Generator::Full),
            "free" => Ok(Generator::Free),
            other => Err(Error::InvalidArgument(format!("unknown generator {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum EvolutionState {
    Function(TestFunction),
    Profile(EnergyProfile),
}

#[derive(Debug, Clone)]
pub struct EvolutionRequest {
    pub state: EvolutionState,
    pub time: f64,
    pub generator: Generator,
    pub sign: Sign,
}

impl EvolutionRequest {
    pub fn new(f: &TestFunction, time: f64) -> Self {
        Self { state: EvolutionState::Function(f.clone()), time, generator: Generator::Full, sign: Sign::Plus }
    }

    pub fn kind(&self) -> TransformKind {
        match self.generator {
            Generator::Full => self.sign.into(),
            Generator::Free => TransformKind::Zero,
        }
    }
}

/// Multiplication by `exp(-i E t / hbar)`.
pub fn evolve_profile(profile: &EnergyProfile, time: f64, cfg: &PotentialConfig) -> EnergyProfile {
    let hbar = cfg.hbar;
    profile.multiply(|e| (-I * (e * time / hbar)).exp())
}

/// The energy profile of the request's state after evolution.
pub fn evolved_profile(req: &EvolutionRequest, plan: &TransformPlan, cfg: &PotentialConfig) -> Result<EnergyProfile> {
    let kind = req.kind();
    let start = match &req.state {
        EvolutionState::Function(f) => forward(kind, f, plan.energy.clone(), cfg)?,
        EvolutionState::Profile(p) => {
            if p.kind != kind {
                return Err(Error::InvalidArgument(format!(
                    "profile is in the {} representation but the request evolves in {}",
                    p.kind.name(),
                    kind.name()
                )));
            }
            p.clone()
        }
    };
    let step = plan.max_phase_step(req.time, cfg);
    if step > std::f64::consts::FRAC_PI_4 {
        log::warn!("phase step {step:.3} between energy nodes at t = {} exceeds pi/4; refine the energy grid", req.time);
    }
    Ok(evolve_profile(&start, req.time, cfg))
}

/// `exp(-i H t / hbar) f` on the plan's radial grid.
pub fn evolve(req: &EvolutionRequest, plan: &TransformPlan, cfg: &PotentialConfig, tolerance: f64) -> Result<RadialSamples> {
    let p = evolved_profile(req, plan, cfg)?;
    inverse_on(&p, plan.radial.clone(), cfg, tolerance)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseCheck {
    /// `|<exp(iHt) phi|E> - exp(-iEt) <phi|E>|`.
    pub ket: f64,
    /// `|<E|exp(-iHt) phi> - exp(-iEt) <E|phi>|`.
    pub bra: f64,
    /// `C(E) ||phi||_{1,0}`, the bound on `|<phi|E>|`.
    pub scale: f64,
}

impl PhaseCheck {
    pub fn relative(&self) -> f64 {
        self.ket.max(self.bra) / self.scale
    }
}

/// The eigenket and eigenbra phase laws, sandwiched with `phi`.
#[allow(clippy::too_many_arguments)]
pub fn ket_phase_check(
    generator: Generator,
    sign: Sign,
    energy: f64,
    time: f64,
    phi: &TestFunction,
    plan: &TransformPlan,
    cfg: &PotentialConfig,
    tol: Tolerance,
) -> Result<PhaseCheck> {
    let req = |t: f64| EvolutionRequest { state: EvolutionState::Function(phi.clone()), time: t, generator, sign };
    let laws = PhaseLaws { generator, sign, energy, time };
    if time == 0.0 {
        let scale = laws.scale(phi, cfg, tol)?;
        return Ok(PhaseCheck { ket: 0.0, bra: 0.0, scale });
    }
    let back = evolve(&req(-time), plan, cfg, 1.0)?;
    let ahead = evolve(&req(time), plan, cfg, 1.0)?;
    laws.check(phi, &ahead, &back, cfg, tol)
}

/// One evaluation point of the phase laws, for callers that already hold the
/// evolved states.
#[derive(Debug, Clone, Copy)]
pub struct PhaseLaws {
    pub generator: Generator,
    pub sign: Sign,
    pub energy: f64,
    pub time: f64,
}

impl PhaseLaws {
    /// `ahead` is `exp(-iHt) phi` and `back` is `exp(iHt) phi`, both sampled.
    pub fn check(
        &self,
        phi: &TestFunction,
        ahead: &RadialSamples,
        back: &RadialSamples,
        cfg: &PotentialConfig,
        tol: Tolerance,
    ) -> Result<PhaseCheck> {
        let kind = EvolutionRequest { state: EvolutionState::Function(phi.clone()), time: 0.0, generator: self.generator, sign: self.sign }.kind();
        let chi = kind.wave(self.energy, cfg)?;
        let phase = (-I * (self.energy * self.time / cfg.hbar)).exp();
        let at_rest = ket_action(kind, self.energy, phi, cfg, tol)?;
        let sandwich = |s: &RadialSamples| -> C64 {
            s.values.iter().zip(s.grid.nodes()).zip(s.grid.weights()).map(|((v, &r), w)| v.conj() * chi.value(r) * *w).sum()
        };
        let ket = (sandwich(back) - phase * at_rest).norm();
        let bra = (sandwich(ahead).conj() - phase * at_rest.conj()).norm();
        Ok(PhaseCheck { ket, bra, scale: self.scale(phi, cfg, tol)? })
    }

    fn scale(&self, phi: &TestFunction, cfg: &PotentialConfig, tol: Tolerance) -> Result<f64> {
        let work_cfg = match self.generator {
            Generator::Full => *cfg,
            Generator::Free => cfg.with_v0(0.0),
        };
        Ok(continuity_bound(self.energy, &work_cfg)? * phi.phi_norm(1, 0, cfg, tol)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HunzikerRow {
    pub t: f64,
    pub norm: f64,
    pub ratio: f64,
}

/// `max ||r^k H^m exp(-iHt) phi||` over `k + m <= n`, with `H^m` applied as `E^m`
/// in the energy representation, and its ratio to `(1 + |t|/hbar)^n`.
pub fn hunziker_diagnostic(
    phi: &TestFunction,
    n: usize,
    times: &[f64],
    plan: &TransformPlan,
    cfg: &PotentialConfig,
) -> Result<Vec<HunzikerRow>> {
    if 2 * n > crate::testspace::MAX_DERIVATIVE_ORDER {
        return Err(Error::OrderTooHigh { order: 2 * n, max: crate::testspace::MAX_DERIVATIVE_ORDER });
    }
    let base = forward(TransformKind::Plus, phi, plan.energy.clone(), cfg)?;
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        let p = evolve_profile(&base, t, cfg);
        let mut best: f64 = 0.0;
        for m in 0..=n {
            let pm = p.multiply(|e| C64::new(e.powi(m as i32), 0.0));
            let s = inverse_on(&pm, plan.radial.clone(), cfg, 1.0)?;
            for k in 0..=(n - m) {
                let v: f64 = s
                    .values
                    .iter()
                    .zip(s.grid.nodes())
                    .zip(s.grid.weights())
                    .map(|((v, &r), w)| w * (r.powi(k as i32) * v.norm()).powi(2))
                    .sum();
                best = best.max(v.sqrt());
            }
        }
        rows.push(HunzikerRow { t, norm: best, ratio: best / (1.0 + t.abs() / cfg.hbar).powi(n as i32) });
    }
    Ok(rows)
}

/// Smallest constant bounding every ratio of the table.
pub fn fitted_constant(rows: &[HunzikerRow], initial_norm: f64) -> f64 {
    rows.iter().map(|r| r.ratio / initial_norm).fold(0.0, f64::max)
}

pub fn write_snapshot_csv<W: Write>(s: &RadialSamples, mut out: W) -> std::io::Result<()> {
    writeln!(out, "r,re,im,abs2")?;
    for (r, v) in s.grid.nodes().iter().zip(&s.values) {
        writeln!(out, "{}", crate::units::csv_row(&[*r, v.re, v.im, v.norm_sqr()]))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotManifest {
    pub times: Vec<f64>,
    pub generator: Generator,
    pub sign: Sign,
    pub cfg: PotentialConfig,
    pub files: Vec<String>,
}
