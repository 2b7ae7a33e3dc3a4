//! Moller operators, the S operator, S-matrix elements and the sandwiched
//! Lippmann-Schwinger equation, all assembled from the energy transforms.

use serde::Serialize;

use crate::coeffs::{s_matrix, Sign};
use crate::error::{Error, Result};
use crate::green::free_green_k;
use crate::quadrature::{integrate, integrate_partitioned, uniform_cuts, Tolerance};
use crate::radial::{inner_product, RadialFunction, RadialSamples};
use crate::testspace::{continuity_bound, TestFunction};
use crate::transforms::{
    forward, forward_sampled, inverse_derivative_on, inverse_on, EnergyProfile, PlanOptions, TransformKind,
    TransformPlan,
};
use crate::units::{PotentialConfig, C64};

/// Radial room left for the part of a scattered state delayed by the shell.
pub const SCATTERING_MARGIN: f64 = 40.0;

/// A plan sized for Moller and S-operator compositions of the given states.
pub fn scattering_plan(states: &[&TestFunction], cfg: &PotentialConfig) -> Result<TransformPlan> {
    let end = states.iter().map(|f| f.support_end()).fold(0.0, f64::max);
    let w = states.iter().flat_map(|f| f.bumps().iter().map(|b| b.halfwidth)).fold(f64::INFINITY, f64::min);
    TransformPlan::build(end, w, cfg, PlanOptions { margin: SCATTERING_MARGIN + 3.0 * cfg.b, ..PlanOptions::round_trip() })
}

/// `Omega+- f = U+-^dagger U0 f` on the plan's radial grid.
pub fn moller(sign: Sign, f: &TestFunction, plan: &TransformPlan, cfg: &PotentialConfig, tolerance: f64) -> Result<RadialSamples> {
    let free = forward(TransformKind::Zero, f, plan.energy.clone(), cfg)?;
    inverse_on(&free.with_kind(sign.into()), plan.radial.clone(), cfg, tolerance)
}

/// `S f = U0^dagger U- U+^dagger U0 f`.
pub fn s_operator(f: &TestFunction, plan: &TransformPlan, cfg: &PotentialConfig, tolerance: f64) -> Result<RadialSamples> {
    let in_state = moller(Sign::Plus, f, plan, cfg, tolerance)?;
    let out = forward_sampled(TransformKind::Minus, &in_state, plan.energy.clone(), cfg)?;
    inverse_on(&out.with_kind(TransformKind::Zero), plan.radial.clone(), cfg, tolerance)
}

/// `S(E)` at every node of the profile's grid, times the profile.
pub fn s_multiply(profile: &EnergyProfile, cfg: &PotentialConfig) -> Result<EnergyProfile> {
    let s = profile.grid.energies.iter().map(|&e| s_matrix(e, cfg)).collect::<Result<Vec<_>>>()?;
    let mut out = profile.clone();
    for (v, s) in out.values.iter_mut().zip(s) {
        *v *= s;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SMatrixElement {
    /// `int dE conj(<E-|psi>) S(E) <E+|phi>`.
    pub energy_integral: C64,
    /// `(psi, phi)` by radial quadrature.
    pub direct: C64,
}

/// `(psi-, phi+)` through the energy representation, with the radial inner product alongside.
pub fn s_matrix_element(
    psi: &TestFunction,
    phi: &TestFunction,
    plan: &TransformPlan,
    cfg: &PotentialConfig,
    tol: Tolerance,
) -> Result<SMatrixElement> {
    let psi_minus = forward(TransformKind::Minus, psi, plan.energy.clone(), cfg)?;
    let phi_plus = forward(TransformKind::Plus, phi, plan.energy.clone(), cfg)?;
    let energy_integral = psi_minus.inner(&s_multiply(&phi_plus, cfg)?)?;
    let direct = inner_product(psi, phi, tol)?;
    Ok(SMatrixElement { energy_integral, direct })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LsResidual {
    pub residual: f64,
    /// `int |phi| * sup |chi|`, the natural size of each term.
    pub scale: f64,
    pub eigen_term: C64,
    pub free_term: C64,
    pub scattered_term: C64,
}

impl LsResidual {
    pub fn relative(&self) -> f64 {
        self.residual / self.scale
    }
}

/// `|<phi|chi+-> - <phi|chi0> - <phi|G0+- V chi+->|` at real `E`.
pub fn ls_residual(sign: Sign, energy: f64, phi: &TestFunction, cfg: &PotentialConfig, tol: Tolerance) -> Result<LsResidual> {
    if !(energy > 0.0) {
        return Err(Error::InvalidArgument(format!("the LS residual needs E > 0, got {energy}")));
    }
    let kind = TransformKind::from(sign);
    let chi = kind.wave(energy, cfg)?;
    let chi0 = TransformKind::Zero.wave(energy, cfg)?;
    let k = C64::new((cfg.c2() * energy).sqrt(), 0.0);
    let c2 = cfg.c2();
    let half_period = std::f64::consts::PI / k.re;
    let shell_cuts = uniform_cuts(cfg.a, cfg.b, half_period);
    let scattered_at = |r: f64| -> Result<C64> {
        let mut cuts = shell_cuts.clone();
        if r > cfg.a && r < cfg.b {
            cuts.push(r);
            cuts.sort_by(f64::total_cmp);
        }
        Ok(integrate_partitioned(|s| free_green_k(sign, r, s, k, c2) * cfg.v0 * chi.value(s), &cuts, tol)?.value)
    };
    let mut eigen = C64::new(0.0, 0.0);
    let mut free = C64::new(0.0, 0.0);
    let mut scattered = C64::new(0.0, 0.0);
    let mut l1 = 0.0;
    for (lo, hi) in phi.pieces() {
        let mut cuts = uniform_cuts(lo, hi, half_period.min((hi - lo) / 8.0));
        cuts.extend([cfg.a, cfg.b].iter().filter(|&&x| x > lo && x < hi));
        cuts.sort_by(f64::total_cmp);
        eigen += integrate_partitioned(|r| phi.value(r).conj() * chi.value(r), &cuts, tol)?.value;
        free += integrate_partitioned(|r| phi.value(r).conj() * chi0.value(r), &cuts, tol)?.value;
        l1 += integrate(|r| C64::new(phi.value(r).norm(), 0.0), lo, hi, &[], tol)?.value.re;
        let failure = std::cell::OnceCell::new();
        let outer = integrate_partitioned(
            |r| match scattered_at(r) {
                Ok(v) => phi.value(r).conj() * v,
                Err(e) => {
                    let _ = failure.set(e);
                    C64::new(0.0, 0.0)
                }
            },
            &cuts,
            tol,
        )?;
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        scattered += outer.value;
    }
    let scale = l1 * continuity_bound(energy, cfg)?;
    Ok(LsResidual {
        residual: (eigen - free - scattered).norm(),
        scale,
        eigen_term: eigen,
        free_term: free,
        scattered_term: scattered,
    })
}

/// Relative L2 distance between `Omega+- f` and `int dE chi+-(r;E) <E|f>`, with
/// the free bra evaluated by adaptive quadrature node by node.
pub fn decompose_moller_check(
    sign: Sign,
    f: &TestFunction,
    plan: &TransformPlan,
    cfg: &PotentialConfig,
    tol: Tolerance,
    tolerance: f64,
) -> Result<f64> {
    let composed = moller(sign, f, plan, cfg, tolerance)?;
    let values = plan
        .energy
        .energies
        .iter()
        .map(|&e| crate::transforms::bra_action(TransformKind::Zero, e, f, cfg, tol))
        .collect::<Result<Vec<_>>>()?;
    let profile = EnergyProfile { grid: plan.energy.clone(), values, kind: sign.into() };
    let direct = inverse_on(&profile, plan.radial.clone(), cfg, tolerance)?;
    Ok(composed.distance(&direct)? / f.l2_norm(tol)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Intertwining {
    /// `(Omega f, H Omega g)`, from the quadratic form of `h`.
    pub full: C64,
    /// `(f, H0 g)`.
    pub free: C64,
}

/// Both sides of `Omega^dagger H Omega = H0`, sandwiched between `f` and `g`.
pub fn intertwining_check(
    sign: Sign,
    f: &TestFunction,
    g: &TestFunction,
    plan: &TransformPlan,
    cfg: &PotentialConfig,
    tol: Tolerance,
    tolerance: f64,
) -> Result<Intertwining> {
    let kind = TransformKind::from(sign);
    let nodes = plan.radial.nodes();
    let pf = forward(TransformKind::Zero, f, plan.energy.clone(), cfg)?.with_kind(kind);
    let pg = forward(TransformKind::Zero, g, plan.energy.clone(), cfg)?.with_kind(kind);
    let uf = inverse_on(&pf, plan.radial.clone(), cfg, tolerance)?.values;
    let ug = inverse_on(&pg, plan.radial.clone(), cfg, tolerance)?.values;
    let df = inverse_derivative_on(&pf, plan.radial.clone(), cfg, tolerance)?.values;
    let dg = inverse_derivative_on(&pg, plan.radial.clone(), cfg, tolerance)?.values;
    let c2 = cfg.c2();
    let full = (0..nodes.len())
        .map(|i| {
            let r = nodes[i];
            plan.radial.weights()[i] * (df[i].conj() * dg[i] / c2 + cfg.potential(r) * uf[i].conj() * ug[i])
        })
        .sum();
    let h0g = g.apply_h(&cfg.with_v0(0.0), 1)?;
    let free = inner_product(f, &h0g, tol)?;
    Ok(Intertwining { full, free })
}

/// Relative distance of a sampled state from an analytic one, and the norm ratio.
pub fn compare<F: RadialFunction + ?Sized>(s: &RadialSamples, f: &F, norm: f64) -> (f64, f64) {
    (s.distance_to(f) / norm, s.norm() / norm)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::testspace::Bump;

    fn cfg() -> PotentialConfig {
        PotentialConfig::default()
    }

    fn tol() -> Tolerance {
        Tolerance::relative(1e-12)
    }

    #[test]
    fn ls_residual_small_above_and_below_barrier() {
        let c = cfg();
        let phi = TestFunction::new(
            vec![Bump::new(0.5, 0.4, C64::new(1.0, 0.0)), Bump::new(1.5, 0.4, C64::new(0.5, 0.5)), Bump::new(3.0, 0.8, C64::new(0.0, -1.0))],
            6.0,
            &c,
        )
        .unwrap();
        for e in [2.0, 5.0, 10.0] {
            for sign in [Sign::Plus, Sign::Minus] {
                let r = ls_residual(sign, e, &phi, &c, tol()).unwrap();
                assert!(r.relative() < 1e-5, "E={e} {sign:?}: {r:?}");
                assert!(r.scattered_term.norm() > 1e-3 * r.scale);
            }
        }
        let free = c.with_v0(0.0);
        let r = ls_residual(Sign::Plus, 5.0, &phi, &free, tol()).unwrap();
        assert!(r.residual < 1e-10);
    }

    #[test]
    fn s_matrix_element_matches_inner_product() {
        let c = cfg();
        let psi = TestFunction::new(vec![Bump::new(3.5, 1.2, C64::new(1.0, 0.3))], 8.0, &c).unwrap();
        let phi = TestFunction::new(vec![Bump::new(4.0, 1.5, C64::new(-0.2, 1.0))], 8.0, &c).unwrap();
        let plan = scattering_plan(&[&psi, &phi], &c).unwrap();
        let el = s_matrix_element(&psi, &phi, &plan, &c, tol()).unwrap();
        let scale = psi.l2_norm(tol()).unwrap() * phi.l2_norm(tol()).unwrap();
        assert!((el.energy_integral - el.direct).norm() < 1e-6 * scale, "{el:?}");
        let self_el = s_matrix_element(&phi, &phi, &plan, &c, tol()).unwrap();
        assert!(self_el.energy_integral.im.abs() < 1e-6 * scale);
        assert!((self_el.energy_integral.re - phi.l2_norm(tol()).unwrap().powi(2)).abs() < 1e-6 * scale);
    }
}
