//! Resolvent kernel of the shell Hamiltonian off the real axis, its expansion in
//! the `{sigma1, sigma2}` bases, and the boundary value of the spectral density.
//!
//! The kernel is built from the regular solution `chi` (vanishing at 0) and the
//! solution square-integrable at infinity, `f+` above the real axis and `f-`
//! below it:
//!
//! ```text
//! G(r, s; E) = c2 chi(min) f(max) / W(chi, f)
//! ```
//!
//! With that choice the Wronskians are `2ik J4` and `-2ik J3`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::coeffs::{compute_coefficients, CoefficientSet, Sign};
use crate::eigenfuncs::{chi_pm, chi_pm_from, f_pm_from, normalization_factor, regular_from, sigma2_from, PiecewiseWave};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, Tolerance};
use crate::radial::RadialFunction;
use crate::units::{wave_number, ComplexEnergy, PotentialConfig, C64, I};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HalfPlane {
    Upper,
    Lower,
}

impl HalfPlane {
    pub fn of(energy: ComplexEnergy) -> Result<Self> {
        if energy.im() > 0.0 {
            Ok(HalfPlane::Upper)
        } else if energy.im() < 0.0 {
            Ok(HalfPlane::Lower)
        } else {
            Err(Error::OnRealAxis(energy.value()))
        }
    }
}

/// Which eigenfunction plays `sigma1`: `chi+` for the in basis, `chi-` for the out basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    In,
    Out,
}

impl Basis {
    pub fn sign(self) -> Sign {
        match self {
            Basis::In => Sign::Plus,
            Basis::Out => Sign::Minus,
        }
    }
}

/// The resolvent kernel at one complex energy, with the pieces it is built from.
#[derive(Debug, Clone)]
pub struct Resolvent {
    pub energy: ComplexEnergy,
    pub half_plane: HalfPlane,
    k: C64,
    chi: PiecewiseWave,
    f: PiecewiseWave,
    scale: C64,
}

impl Resolvent {
    pub fn new(energy: ComplexEnergy, cfg: &PotentialConfig) -> Result<Self> {
        let half_plane = HalfPlane::of(energy)?;
        let c = compute_coefficients(energy, cfg)?;
        let (sign, w) = match half_plane {
            HalfPlane::Upper => (Sign::Plus, 2.0 * I * c.k * c.j4()),
            HalfPlane::Lower => (Sign::Minus, -2.0 * I * c.k * c.j3()),
        };
        Ok(Self { energy, half_plane, k: c.k, chi: regular_from(&c, cfg), f: f_pm_from(sign, &c, cfg), scale: cfg.c2() / w })
    }

    #[inline]
    pub fn kernel(&self, r: f64, s: f64) -> C64 {
        let (lo, hi) = if r < s { (r, s) } else { (s, r) };
        self.scale * self.chi.value(lo) * self.f.value(hi)
    }

    /// `u(r) = int G(r, s) f(s) ds` over the support of `source`.
    pub fn apply_at<F: RadialFunction + ?Sized>(&self, source: &F, r: f64, tol: Tolerance) -> Result<C64> {
        let mut total = C64::new(0.0, 0.0);
        let breaks = [r, self.chi.a, self.chi.b];
        for (lo, hi) in source.pieces() {
            total += integrate(|s| self.kernel(r, s) * source.value(s), lo, hi, &breaks, tol)?.value;
        }
        Ok(total)
    }
}

/// `R(E) source` as a radial function, cut off where the decaying outer solution
/// has fallen by `cutoff` beyond the source.
pub struct Resolved<'a, F: ?Sized> {
    res: &'a Resolvent,
    source: &'a F,
    end: f64,
    tol: Tolerance,
}

impl Resolvent {
    pub fn resolved<'a, F: RadialFunction + ?Sized>(&'a self, source: &'a F, cutoff: f64, tol: Tolerance) -> Resolved<'a, F> {
        let last = source.pieces().last().map_or(0.0, |p| p.1);
        Resolved { res: self, source, end: last + cutoff.recip().ln() / self.k.im.abs(), tol }
    }
}

impl<F: RadialFunction + ?Sized> RadialFunction for Resolved<'_, F> {
    /// NaN when the inner quadrature fails.
    fn value(&self, r: f64) -> C64 {
        self.res.apply_at(self.source, r, self.tol).unwrap_or(C64::new(f64::NAN, f64::NAN))
    }

    fn pieces(&self) -> Vec<(f64, f64)> {
        vec![(0.0, self.end)]
    }
}

/// `||(E - h) R(E) f - f|| / ||f||` on a uniform grid of step `spacing`, with
/// `h` applied by a sixth-order difference of step `spacing / 2`. Points whose
/// stencil straddles `a` or `b` are skipped, since `u''` jumps there.
pub fn resolvent_residual<F: RadialFunction + ?Sized>(
    source: &F,
    energy: ComplexEnergy,
    cfg: &PotentialConfig,
    spacing: f64,
    tol: Tolerance,
) -> Result<f64> {
    let res = Resolvent::new(energy, cfg)?;
    let h = 0.5 * spacing;
    let u = |r: f64| res.apply_at(source, r, tol);
    let end = source.pieces().last().map_or(0.0, |p| p.1) + 5.0 / res.k.im.abs();
    let n = (end / spacing).ceil() as usize;
    let e = energy.value();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 1..n {
        let r = i as f64 * spacing;
        if r < 3.5 * h || (r - cfg.a).abs() < 3.5 * h || (r - cfg.b).abs() < 3.5 * h {
            continue;
        }
        let failed = std::cell::OnceCell::new();
        let d2 = second_difference(
            |x| {
                u(x).unwrap_or_else(|e| {
                    let _ = failed.set(e);
                    C64::new(0.0, 0.0)
                })
            },
            r,
            h,
        );
        if let Some(e) = failed.into_inner() {
            return Err(e);
        }
        let ur = u(r)?;
        let lhs = e * ur + d2 / cfg.c2() - cfg.potential(r) * ur;
        num += (lhs - source.value(r)).norm_sqr();
        den += source.value(r).norm_sqr();
    }
    if !(den > 0.0) {
        return Err(Error::InvalidArgument("resolvent residual needs a nonzero source".into()));
    }
    Ok((num / den).sqrt())
}

/// Largest deviation from `R(E1) f - R(E2) f = (E2 - E1) R(E1) R(E2) f` over `r_nodes`,
/// relative to the largest `|R(E1) f - R(E2) f|`.
pub fn first_resolvent_identity<F: RadialFunction + ?Sized>(
    source: &F,
    e1: ComplexEnergy,
    e2: ComplexEnergy,
    cfg: &PotentialConfig,
    r_nodes: &[f64],
    tol: Tolerance,
) -> Result<f64> {
    let r1 = Resolvent::new(e1, cfg)?;
    let r2 = Resolvent::new(e2, cfg)?;
    let inner = r2.resolved(source, 1e-12, tol);
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for &r in r_nodes {
        let lhs = r1.apply_at(source, r, tol)? - r2.apply_at(source, r, tol)?;
        let rhs = (e2.value() - e1.value()) * r1.apply_at(&inner, r, tol)?;
        if !rhs.is_finite() {
            return Err(Error::InvalidArgument(format!("inner resolvent failed near r = {r}")));
        }
        worst = worst.max((lhs - rhs).norm());
        scale = scale.max(lhs.norm());
    }
    Ok(worst / scale)
}

/// The kernel of `(E - H)^{-1}` at `Im(E) != 0`.
pub fn green_theorem1(r: f64, s: f64, energy: ComplexEnergy, cfg: &PotentialConfig) -> Result<C64> {
    if !(r > 0.0 && s > 0.0) {
        return Err(Error::InvalidArgument(format!("green function needs r, s > 0 (got {r}, {s})")));
    }
    Ok(Resolvent::new(energy, cfg)?.kernel(r, s))
}

/// The same kernel written with the delta-normalised eigenfunctions:
/// `-pi N(E) chi+-(min) f+-(max)`, `+` in the upper and `-` in the lower half plane.
pub fn green_eigen_form(r: f64, s: f64, energy: ComplexEnergy, cfg: &PotentialConfig) -> Result<C64> {
    let sign = match HalfPlane::of(energy)? {
        HalfPlane::Upper => Sign::Plus,
        HalfPlane::Lower => Sign::Minus,
    };
    let c = compute_coefficients(energy, cfg)?;
    let n = normalization_factor(energy, cfg);
    let chi = chi_pm_from(sign, &c, cfg);
    let f = f_pm_from(sign, &c, cfg);
    let (lo, hi) = if r < s { (r, s) } else { (s, r) };
    Ok(-PI * n * chi.value(lo) * f.value(hi))
}

/// Values `u(r_i)` of the resolvent applied to `source`.
pub fn resolvent_apply<F: RadialFunction + ?Sized>(
    source: &F,
    energy: ComplexEnergy,
    cfg: &PotentialConfig,
    r_nodes: &[f64],
    tol: Tolerance,
) -> Result<Vec<C64>> {
    let res = Resolvent::new(energy, cfg)?;
    r_nodes.iter().map(|&r| res.apply_at(source, r, tol)).collect()
}

/// Free kernels `G0+-(r, s; E) = -c2 sin(k min) e^{+-ik max} / k`.
pub fn free_green(sign: Sign, r: f64, s: f64, energy: ComplexEnergy, cfg: &PotentialConfig) -> Result<C64> {
    let e = energy.value();
    if e.norm() < crate::coeffs::DEFAULT_DEGENERACY_THRESHOLD {
        return Err(Error::DegenerateEnergy { energy: e, threshold: crate::coeffs::DEFAULT_DEGENERACY_THRESHOLD });
    }
    let k = wave_number(energy, cfg);
    Ok(free_green_k(sign, r, s, k, cfg.c2()))
}

#[inline]
pub(crate) fn free_green_k(sign: Sign, r: f64, s: f64, k: C64, c2: f64) -> C64 {
    let (lo, hi) = if r < s { (r, s) } else { (s, r) };
    let sg = sign.factor();
    -c2 * (k * lo).sin() * (sg * I * k * hi).exp() / k
}

/// `theta_ij` of the expansion `G = sum theta_ij sigma_i(r) conj(sigma_j(s; conj E))`, `r > s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaMatrix {
    pub entries: [[C64; 2]; 2],
    pub half_plane: HalfPlane,
    pub basis: Basis,
    pub energy: C64,
}

pub fn theta_matrix(energy: ComplexEnergy, cfg: &PotentialConfig, basis: Basis) -> Result<ThetaMatrix> {
    let half_plane = HalfPlane::of(energy)?;
    if !(energy.re() > 0.0) {
        return Err(Error::InvalidArgument(format!("theta matrix needs Re(E) > 0, got {}", energy.re())));
    }
    let c = compute_coefficients(energy, cfg)?;
    let n = normalization_factor(energy, cfg);
    Ok(ThetaMatrix { entries: theta_entries(&c, n, half_plane, basis), half_plane, basis, energy: energy.value() })
}

fn theta_entries(c: &CoefficientSet, n: C64, half: HalfPlane, basis: Basis) -> [[C64; 2]; 2] {
    let two_pi_i = 2.0 * PI * I;
    let zero = C64::new(0.0, 0.0);
    let t11 = match half {
        HalfPlane::Upper => two_pi_i * c.j3() * c.c4() / c.w,
        HalfPlane::Lower => two_pi_i * c.j4() * c.c3() / c.w,
    };
    let t21 = match basis {
        Basis::In => PI * n * c.j3() / c.w,
        Basis::Out => -PI * n * c.j4() / c.w,
    };
    [[t11, zero], [t21, zero]]
}

impl ThetaMatrix {
    /// `sum theta_ij sigma_i(r; E) conj(sigma_j(s; conj E))` for `r > s`.
    pub fn expand(&self, r: f64, s: f64, cfg: &PotentialConfig) -> Result<C64> {
        let e: ComplexEnergy = self.energy.into();
        let c = compute_coefficients(e, cfg)?;
        let sign = self.basis.sign();
        let sigma = [chi_pm_from(sign, &c, cfg), sigma2_from(&c, cfg)];
        let sigma_conj = [chi_pm(sign, e.conj(), cfg)?, sigma2_from(&compute_coefficients(e.conj(), cfg)?, cfg)];
        let mut total = C64::new(0.0, 0.0);
        for (row, left) in self.entries.iter().zip(&sigma) {
            for (entry, right) in row.iter().zip(&sigma_conj) {
                total += entry * left.value(r) * right.value(s).conj();
            }
        }
        Ok(total)
    }
}

/// `(theta_ij(E - i eps) - theta_ij(E + i eps)) / (2 pi i)`.
pub fn spectral_density_entry(
    i: usize,
    j: usize,
    energy: f64,
    epsilon: f64,
    cfg: &PotentialConfig,
    basis: Basis,
) -> Result<C64> {
    if i > 1 || j > 1 {
        return Err(Error::InvalidArgument(format!("theta index ({i}, {j}) out of range")));
    }
    if !(energy > 0.0 && epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("need E > 0 and eps > 0 (got {energy}, {epsilon})")));
    }
    let below = theta_matrix(ComplexEnergy::new(energy, -epsilon), cfg, basis)?;
    let above = theta_matrix(ComplexEnergy::new(energy, epsilon), cfg, basis)?;
    Ok((below.entries[i][j] - above.entries[i][j]) / (2.0 * PI * I))
}

/// Density of `rho_11` at `E`, smeared by `eps`; tends to 1 (Lebesgue) as `eps -> 0`.
pub fn spectral_measure_density(energy: f64, epsilon: f64, cfg: &PotentialConfig) -> Result<f64> {
    Ok(spectral_density_entry(0, 0, energy, epsilon, cfg, Basis::In)?.re)
}

/// Zero-`eps` limit of [`spectral_measure_density`], by linear extrapolation through
/// the two smallest of `epsilons`.
pub fn extrapolated_measure_density(energy: f64, epsilons: &[f64], cfg: &PotentialConfig) -> Result<f64> {
    let mut eps = epsilons.to_vec();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    if eps.len() < 2 {
        return Err(Error::InvalidArgument("extrapolation needs two distinct epsilons".into()));
    }
    let (e1, e2) = (eps[0], eps[1]);
    let (d1, d2) = (spectral_measure_density(energy, e1, cfg)?, spectral_measure_density(energy, e2, cfg)?);
    Ok(d1 - e1 * (d2 - d1) / (e2 - e1))
}

/// Sixth-order central second difference, for residual checks of sampled solutions.
pub fn second_difference<F: Fn(f64) -> C64>(u: F, r: f64, h: f64) -> C64 {
    const W: [f64; 4] = [-49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0];
    let mut acc = u(r) * W[0];
    for (m, w) in W.iter().enumerate().skip(1) {
        let d = m as f64 * h;
        acc += (u(r + d) + u(r - d)) * *w;
    }
    acc / (h * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testspace::{Bump, TestFunction};

    fn cfg() -> PotentialConfig {
        PotentialConfig::default()
    }

    #[test]
    fn symmetric_in_r_and_s() {
        let e = ComplexEnergy::new(3.0, 1.0);
        let g1 = green_theorem1(0.7, 2.5, e, &cfg()).unwrap();
        let g2 = green_theorem1(2.5, 0.7, e, &cfg()).unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn matches_eigenfunction_form_both_half_planes() {
        for e in [ComplexEnergy::new(3.0, 1.0), ComplexEnergy::new(7.0, -0.5), ComplexEnergy::new(0.5, 0.2)] {
            for (r, s) in [(0.4, 1.5), (2.5, 1.1), (0.3, 6.0), (4.0, 3.5)] {
                let a = green_theorem1(r, s, e, &cfg()).unwrap();
                let b = green_eigen_form(r, s, e, &cfg()).unwrap();
                assert!((a - b).norm() < 1e-12 * a.norm(), "E={e:?} ({r},{s}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn free_kernel_agrees() {
        let free = PotentialConfig::new(1.0, 2.0, 0.0).unwrap();
        let e = ComplexEnergy::new(1.0, 1.0);
        for (r, s) in [(0.5, 1.7), (3.0, 0.2)] {
            let g = green_theorem1(r, s, e, &free).unwrap();
            let g0 = free_green(Sign::Plus, r, s, e, &free).unwrap();
            assert!((g - g0).norm() < 1e-13 * g.norm());
        }
        let real = free_green(Sign::Plus, 0.8, 1.9, 2.0.into(), &free).unwrap();
        let minus = free_green(Sign::Minus, 0.8, 1.9, 2.0.into(), &free).unwrap();
        assert!((real.conj() - minus).norm() < 1e-15);
    }

    #[test]
    fn real_axis_is_rejected() {
        assert!(matches!(green_theorem1(1.0, 2.0, 3.0.into(), &cfg()), Err(Error::OnRealAxis(_))));
        assert!(matches!(theta_matrix(3.0.into(), &cfg(), Basis::In), Err(Error::OnRealAxis(_))));
    }

    #[test]
    fn theta_structure_and_expansion() {
        for basis in [Basis::In, Basis::Out] {
            for e in [ComplexEnergy::new(5.0, 0.5), ComplexEnergy::new(5.0, -0.5), ComplexEnergy::new(2.0, 1.0)] {
                let t = theta_matrix(e, &cfg(), basis).unwrap();
                assert_eq!(t.entries[0][1], C64::new(0.0, 0.0));
                assert_eq!(t.entries[1][1], C64::new(0.0, 0.0));
                for (r, s) in [(2.5, 0.5), (1.5, 1.2), (6.0, 2.2)] {
                    let direct = green_theorem1(r, s, e, &cfg()).unwrap();
                    let expanded = t.expand(r, s, &cfg()).unwrap();
                    assert!((direct - expanded).norm() < 1e-10 * direct.norm(), "{basis:?} {e:?}: {direct} vs {expanded}");
                }
            }
        }
    }

    #[test]
    fn upper_and_lower_differ_only_in_theta11_formula() {
        let c = compute_coefficients(ComplexEnergy::new(5.0, 0.3), &cfg()).unwrap();
        let n = normalization_factor(ComplexEnergy::new(5.0, 0.3), &cfg());
        let up = theta_entries(&c, n, HalfPlane::Upper, Basis::In);
        let lo = theta_entries(&c, n, HalfPlane::Lower, Basis::In);
        assert_eq!(up[1][0], lo[1][0]);
        assert_ne!(up[0][0], lo[0][0]);
    }

    #[test]
    fn spectral_density_is_lebesgue() {
        let d = spectral_measure_density(5.0, 1e-4, &cfg()).unwrap();
        assert!((d - 1.0).abs() < 1e-3, "{d}");
        let free = PotentialConfig::new(1.0, 2.0, 0.0).unwrap();
        let d0 = spectral_measure_density(5.0, 1e-3, &free).unwrap();
        assert!((d0 - 1.0).abs() < 1e-2);
        let off = spectral_density_entry(0, 1, 5.0, 1e-4, &cfg(), Basis::In).unwrap();
        assert_eq!(off.norm(), 0.0);
        let low = spectral_density_entry(1, 0, 5.0, 1e-6, &cfg(), Basis::In).unwrap();
        assert!(low.norm() < 1e-4);
    }

    #[test]
    fn resolvent_residual_and_linearity() {
        let c = cfg();
        let f = TestFunction::new(vec![Bump::new(4.0, 1.0, C64::new(1.0, 0.5))], 8.0, &c).unwrap();
        let g = TestFunction::new(vec![Bump::new(0.5, 0.3, C64::new(-0.7, 0.0))], 8.0, &c).unwrap();
        let e = ComplexEnergy::new(3.0, 2.0);
        let res = Resolvent::new(e, &c).unwrap();
        let tol = Tolerance::relative(1e-13);
        let u = |r: f64| res.apply_at(&f, r, tol).unwrap();
        let h = 0.01;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..200 {
            let r = 2.2 + 0.04 * i as f64;
            let lhs = e.value() * u(r) + second_difference(u, r, h) / c.c2();
            num += (lhs - f.value(r)).norm_sqr();
            den += f.value(r).norm_sqr();
        }
        assert!((num / den).sqrt() < 1e-6, "{}", (num / den).sqrt());

        let alpha = C64::new(0.3, -1.2);
        let comb = TestFunction::new(
            f.bumps().iter().cloned().chain(g.bumps().iter().map(|b| b.scaled(alpha))).collect(),
            8.0,
            &c,
        )
        .unwrap();
        for r in [0.4, 1.5, 3.9] {
            let lhs = res.apply_at(&comb, r, tol).unwrap();
            let rhs = res.apply_at(&f, r, tol).unwrap() + alpha * res.apply_at(&g, r, tol).unwrap();
            assert!((lhs - rhs).norm() < 1e-12 * (1.0 + rhs.norm()));
        }
    }

    #[test]
    fn residual_and_first_identity_helpers() {
        let c = cfg();
        let f = TestFunction::new(vec![Bump::new(3.5, 1.0, C64::new(1.0, 0.5))], 8.0, &c).unwrap();
        let tol = Tolerance::relative(1e-12);
        let r = resolvent_residual(&f, ComplexEnergy::new(3.0, 2.0), &c, 0.02, tol).unwrap();
        assert!(r < 1e-6, "{r}");
        let d = first_resolvent_identity(&f, ComplexEnergy::new(3.0, 2.0), ComplexEnergy::new(4.0, 1.0), &c, &[0.5, 1.5, 3.0, 5.0], tol).unwrap();
        assert!(d < 1e-5, "{d}");
    }
}
