//! Closed-form solutions of `(h - E) u = 0` for the shell potential.
//!
//! A [`PiecewiseWave`] stores, for each of the three regions, the local wave number
//! and the value and slope of the solution at the left end of that region:
//!
//! ```text
//! u(r) = u0 cos(q (r - r0)) + u0' sin(q (r - r0)) / q
//! ```
//!
//! This form stays finite when `q -> 0` (energies at the barrier top) and never
//! multiplies exponentially large and small factors, while the absolute-origin
//! exponential amplitudes used in the coefficient formulas are recovered on demand
//! by [`Piece::exp_amplitudes`].

use std::f64::consts::PI;

use serde::Serialize;

use crate::coeffs::{compute_coefficients, sin_over, CoefficientSet, Sign};
use crate::error::{Error, Result};
use crate::units::{branch_sqrt, local_wave_number, wave_number, ComplexEnergy, PotentialConfig, Region, C64, I};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveKind {
    Regular,
    ChiPlus,
    ChiMinus,
    FPlus,
    FMinus,
    Sigma2,
    Free,
}

impl WaveKind {
    pub fn name(self) -> &'static str {
        match self {
            WaveKind::Regular => "regular",
            WaveKind::ChiPlus => "chi_plus",
            WaveKind::ChiMinus => "chi_minus",
            WaveKind::FPlus => "f_plus",
            WaveKind::FMinus => "f_minus",
            WaveKind::Sigma2 => "sigma2",
            WaveKind::Free => "free",
        }
    }

    pub fn vanishes_at_origin(self) -> bool {
        matches!(self, WaveKind::Regular | WaveKind::ChiPlus | WaveKind::ChiMinus | WaveKind::Free)
    }
}

impl std::str::FromStr for WaveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "regular" | "chi" => WaveKind::Regular,
            "chi_plus" => WaveKind::ChiPlus,
            "chi_minus" => WaveKind::ChiMinus,
            "f_plus" => WaveKind::FPlus,
            "f_minus" => WaveKind::FMinus,
            "sigma2" => WaveKind::Sigma2,
            "free" | "chi_free" | "chi0" => WaveKind::Free,
            other => return Err(Error::InvalidArgument(format!("unknown wave kind {other:?}"))),
        })
    }
}

/// One constant-potential segment of a solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Piece {
    /// Local wave number `sqrt(c2 (E - V))`.
    pub q: C64,
    pub potential: f64,
    /// Left end of the segment, where `value` and `slope` are taken.
    pub origin: f64,
    pub value: C64,
    pub slope: C64,
}

impl Piece {
    #[inline]
    pub fn eval(&self, r: f64) -> (C64, C64) {
        let x = r - self.origin;
        if self.q.im == 0.0 {
            let q = self.q.re;
            let (s, c) = (q * x).sin_cos();
            let so = if (q * x).abs() < 1e-3 { sin_over(self.q, x).re } else { s / q };
            (self.value * c + self.slope * so, -self.value * (q * s) + self.slope * c)
        } else {
            let qx = self.q * x;
            let c = qx.cos();
            let so = sin_over(self.q, x);
            let q2 = self.q * self.q;
            (self.value * c + self.slope * so, -self.value * q2 * so + self.slope * c)
        }
    }

    /// `(alpha, beta)` with `u(r) = alpha e^{i q r} + beta e^{-i q r}` on this piece.
    pub fn exp_amplitudes(&self) -> (C64, C64) {
        let d = self.slope / (I * self.q);
        let phase = (I * self.q * self.origin).exp();
        (0.5 * (self.value + d) / phase, 0.5 * (self.value - d) * phase)
    }

    /// Residual of `q^2 = c2 (E - V)`; zero means `(h - E) u = 0` holds on the piece.
    pub fn dispersion_residual(&self, energy: C64, c2: f64) -> f64 {
        let lhs = self.q * self.q;
        let rhs = c2 * (energy - self.potential);
        (lhs - rhs).norm() / (1.0 + rhs.norm())
    }

    fn scaled(self, factor: C64) -> Self {
        Self { value: self.value * factor, slope: self.slope * factor, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PiecewiseWave {
    pub pieces: [Piece; 3],
    pub kind: WaveKind,
    pub energy: C64,
    pub a: f64,
    pub b: f64,
}

impl PiecewiseWave {
    #[inline]
    fn piece_for(&self, r: f64) -> &Piece {
        if r < self.a {
            &self.pieces[0]
        } else if r < self.b {
            &self.pieces[1]
        } else {
            &self.pieces[2]
        }
    }

    /// Value at `r >= 0`; radii past `b` use the outer piece.
    #[inline]
    pub fn value(&self, r: f64) -> C64 {
        self.eval(r).0
    }

    #[inline]
    pub fn derivative(&self, r: f64) -> C64 {
        self.eval(r).1
    }

    /// Value and first derivative.
    #[inline]
    pub fn eval(&self, r: f64) -> (C64, C64) {
        // f+- are single exponentials outside; the cos/sin form would cancel
        // catastrophically where Im(k) r is large
        let s = match self.kind {
            WaveKind::FPlus => 1.0,
            WaveKind::FMinus => -1.0,
            _ => return self.piece_for(r).eval(r),
        };
        if r < self.b {
            return self.piece_for(r).eval(r);
        }
        let p = &self.pieces[2];
        let iq = s * I * p.q;
        let u = p.value * (iq * (r - p.origin)).exp();
        (u, iq * u)
    }

    /// `u'' = -q^2 u`, piece by piece.
    pub fn second_derivative(&self, r: f64) -> C64 {
        let p = self.piece_for(r);
        -(p.q * p.q) * self.value(r)
    }

    /// Checked evaluation.
    pub fn try_value(&self, r: f64) -> Result<C64> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::InvalidArgument(format!("radius must be finite and >= 0, got {r}")));
        }
        Ok(self.value(r))
    }

    pub fn scaled(&self, factor: C64, kind: WaveKind) -> Self {
        Self { pieces: self.pieces.map(|p| p.scaled(factor)), kind, ..*self }
    }

    /// Largest relative jump of value or derivative at `r = a` and `r = b`.
    pub fn continuity_mismatch(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (left, right, r) in [(0, 1, self.a), (1, 2, self.b)] {
            let (ul, dl) = self.pieces[left].eval(r);
            let (ur, dr) = self.pieces[right].eval(r);
            let q = self.pieces[left].q.norm().max(self.pieces[right].q.norm()).max(1e-300);
            let scale = ul.norm() + dl.norm() / q;
            if scale > 0.0 {
                worst = worst.max((ul - ur).norm() / scale).max((dl - dr).norm() / (q * scale));
            }
        }
        worst
    }

    /// Wronskian `u v' - u' v` at radius `r`.
    pub fn wronskian(&self, other: &PiecewiseWave, r: f64) -> C64 {
        let (u, du) = self.eval(r);
        let (v, dv) = other.eval(r);
        u * dv - du * v
    }
}

/// Delta-normalisation factor `N(E) = sqrt(c2 / (pi sqrt(c2 E)))` on the principal branch.
pub fn normalization_factor(energy: ComplexEnergy, cfg: &PotentialConfig) -> C64 {
    branch_sqrt(cfg.c2() / (PI * wave_number(energy, cfg)))
}

/// `N(E)` for real `E > 0`.
pub fn normalization(energy: f64, cfg: &PotentialConfig) -> Result<f64> {
    if !(energy > 0.0) {
        return Err(Error::DegenerateEnergy { energy: C64::new(energy, 0.0), threshold: 0.0 });
    }
    Ok((cfg.c2() / (PI * (cfg.c2() * energy).sqrt())).sqrt())
}

fn piece(energy: ComplexEnergy, region: Region, origin: f64, value: C64, slope: C64, cfg: &PotentialConfig) -> Piece {
    Piece {
        q: local_wave_number(energy, region, cfg),
        potential: cfg.region_potential(region),
        origin,
        value,
        slope,
    }
}

fn from_exponentials(q: C64, r: f64, alpha: C64, beta: C64) -> (C64, C64) {
    let ep = (I * q * r).exp();
    let em = (-I * q * r).exp();
    (alpha * ep + beta * em, I * q * (alpha * ep - beta * em))
}

/// The regular solution `chi`: `sin(kr)` on `(0, a)`, `J1, J2` on the shell and
/// `J3, J4` outside.
pub fn regular_from(c: &CoefficientSet, cfg: &PotentialConfig) -> PiecewiseWave {
    let e: ComplexEnergy = c.energy.into();
    let k = c.k;
    let shell = if c.near_barrier_top(cfg) {
        (((k * cfg.a).sin()), k * (k * cfg.a).cos())
    } else {
        from_exponentials(c.kappa, cfg.a, c.j1(), c.j2())
    };
    let outer = from_exponentials(k, cfg.b, c.j3(), c.j4());
    PiecewiseWave {
        pieces: [
            piece(e, Region::Inner, 0.0, C64::new(0.0, 0.0), k, cfg),
            piece(e, Region::Shell, cfg.a, shell.0, shell.1, cfg),
            piece(e, Region::Outer, cfg.b, outer.0, outer.1, cfg),
        ],
        kind: WaveKind::Regular,
        energy: c.energy,
        a: cfg.a,
        b: cfg.b,
    }
}

pub fn regular_chi(energy: ComplexEnergy, cfg: &PotentialConfig) -> Result<PiecewiseWave> {
    Ok(regular_from(&compute_coefficients(energy, cfg)?, cfg))
}

/// `chi+-(r;E) = N(E) chi(r;E) / J+-(E)`.
pub fn chi_pm_from(sign: Sign, c: &CoefficientSet, cfg: &PotentialConfig) -> PiecewiseWave {
    let n = normalization_factor(c.energy.into(), cfg);
    let (jost, kind) = match sign {
        Sign::Plus => (c.jost_plus, WaveKind::ChiPlus),
        Sign::Minus => (c.jost_minus, WaveKind::ChiMinus),
    };
    regular_from(c, cfg).scaled(n / jost, kind)
}

pub fn chi_pm(sign: Sign, energy: ComplexEnergy, cfg: &PotentialConfig) -> Result<PiecewiseWave> {
    Ok(chi_pm_from(sign, &compute_coefficients(energy, cfg)?, cfg))
}

/// `f+-`: pure `e^{+-ikr}` outside the shell.
pub fn f_pm_from(sign: Sign, c: &CoefficientSet, cfg: &PotentialConfig) -> PiecewiseWave {
    let e: ComplexEnergy = c.energy.into();
    let k = c.k;
    let s = sign.factor();
    let coeff = c.a(sign);
    let inner = from_exponentials(k, 0.0, coeff[0], coeff[1]);
    let shell = if c.near_barrier_top(cfg) {
        // value and slope at a from the outer piece, via the shell transfer
        let outer_v = (s * I * k * cfg.b).exp();
        let outer_d = s * I * k * outer_v;
        let len = cfg.b - cfg.a;
        let q = c.kappa;
        let q2 = cfg.c2() * (c.energy - cfg.v0);
        let so = sin_over(q, len);
        let co = (q * len).cos();
        (outer_v * co - outer_d * so, outer_v * q2 * so + outer_d * co)
    } else {
        from_exponentials(c.kappa, cfg.a, coeff[2], coeff[3])
    };
    let outer_v = (s * I * k * cfg.b).exp();
    PiecewiseWave {
        pieces: [
            piece(e, Region::Inner, 0.0, inner.0, inner.1, cfg),
            piece(e, Region::Shell, cfg.a, shell.0, shell.1, cfg),
            piece(e, Region::Outer, cfg.b, outer_v, s * I * k * outer_v, cfg),
        ],
        kind: if s > 0.0 { WaveKind::FPlus } else { WaveKind::FMinus },
        energy: c.energy,
        a: cfg.a,
        b: cfg.b,
    }
}

pub fn f_pm(sign: Sign, energy: ComplexEnergy, cfg: &PotentialConfig) -> Result<PiecewiseWave> {
    Ok(f_pm_from(sign, &compute_coefficients(energy, cfg)?, cfg))
}

/// `sigma2`: `cos(kr)` on `(0, a)`, `C1, C2` on the shell, `C3, C4` outside.
pub fn sigma2_from(c: &CoefficientSet, cfg: &PotentialConfig) -> PiecewiseWave {
    let e: ComplexEnergy = c.energy.into();
    let k = c.k;
    let shell = if c.near_barrier_top(cfg) {
        ((k * cfg.a).cos(), -k * (k * cfg.a).sin())
    } else {
        from_exponentials(c.kappa, cfg.a, c.c[0], c.c[1])
    };
    let outer = from_exponentials(k, cfg.b, c.c3(), c.c4());
    PiecewiseWave {
        pieces: [
            piece(e, Region::Inner, 0.0, C64::new(1.0, 0.0), C64::new(0.0, 0.0), cfg),
            piece(e, Region::Shell, cfg.a, shell.0, shell.1, cfg),
            piece(e, Region::Outer, cfg.b, outer.0, outer.1, cfg),
        ],
        kind: WaveKind::Sigma2,
        energy: c.energy,
        a: cfg.a,
        b: cfg.b,
    }
}

pub fn sigma2(energy: ComplexEnergy, cfg: &PotentialConfig) -> Result<PiecewiseWave> {
    Ok(sigma2_from(&compute_coefficients(energy, cfg)?, cfg))
}

/// `chi0(r;E) = N(E) sin(kr)`, the free delta-normalised solution.
pub fn free_chi0(energy: ComplexEnergy, cfg: &PotentialConfig) -> Result<PiecewiseWave> {
    let e = energy.value();
    if e.norm() < crate::coeffs::DEFAULT_DEGENERACY_THRESHOLD {
        return Err(Error::DegenerateEnergy { energy: e, threshold: crate::coeffs::DEFAULT_DEGENERACY_THRESHOLD });
    }
    let k = wave_number(energy, cfg);
    let n = normalization_factor(energy, cfg);
    let mk = |origin: f64| {
        let x = k * origin;
        Piece { q: k, potential: 0.0, origin, value: n * x.sin(), slope: n * k * x.cos() }
    };
    Ok(PiecewiseWave { pieces: [mk(0.0), mk(cfg.a), mk(cfg.b)], kind: WaveKind::Free, energy: e, a: cfg.a, b: cfg.b })
}

/// Any of the closed-form kinds at one energy. Without a potential, `chi+-`
/// are taken as the free solution itself.
pub fn wave(kind: WaveKind, energy: ComplexEnergy, cfg: &PotentialConfig) -> Result<PiecewiseWave> {
    match kind {
        WaveKind::Free => free_chi0(energy, cfg),
        WaveKind::ChiPlus | WaveKind::ChiMinus if cfg.v0 == 0.0 => Ok(PiecewiseWave { kind, ..free_chi0(energy, cfg)? }),
        _ => {
            let c = compute_coefficients(energy, cfg)?;
            Ok(match kind {
                WaveKind::Regular => regular_from(&c, cfg),
                WaveKind::ChiPlus => chi_pm_from(Sign::Plus, &c, cfg),
                WaveKind::ChiMinus => chi_pm_from(Sign::Minus, &c, cfg),
                WaveKind::FPlus => f_pm_from(Sign::Plus, &c, cfg),
                WaveKind::FMinus => f_pm_from(Sign::Minus, &c, cfg),
                WaveKind::Sigma2 => sigma2_from(&c, cfg),
                WaveKind::Free => unreachable!(),
            })
        }
    }
}

/// Samples of a numerically integrated solution.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledWave {
    pub r: Vec<f64>,
    pub u: Vec<C64>,
    pub du: Vec<C64>,
}

impl SampledWave {
    /// `max |u_i - w(r_i)|` over the samples.
    pub fn sup_distance(&self, w: &PiecewiseWave) -> f64 {
        self.r.iter().zip(&self.u).map(|(&r, &u)| (u - w.value(r)).norm()).fold(0.0, f64::max)
    }
}

/// Independent check of the closed forms: classical RK4 with step doubling on
/// `u'' = c2 (V(r) - E) u`, from `start` to `end` (either direction).
///
/// Each step is taken once with `h` and twice with `h/2`; the difference over 15 is
/// the local error estimate of the halved steps (order 4), and the Richardson
/// combination is kept. Steps land exactly on `a` and `b`.
#[allow(clippy::too_many_arguments)]
pub fn ode_oracle(
    energy: ComplexEnergy,
    cfg: &PotentialConfig,
    start: f64,
    u0: C64,
    du0: C64,
    end: f64,
    step: f64,
    tolerance: f64,
) -> Result<SampledWave> {
    if !(step > 0.0) || start < 0.0 || end < 0.0 {
        return Err(Error::InvalidArgument("ode_oracle needs step > 0 and radii >= 0".into()));
    }
    let e = energy.value();
    let c2 = cfg.c2();
    let mut cuts = vec![start];
    let (lo, hi) = (start.min(end), start.max(end));
    let mut inner: Vec<f64> = [cfg.a, cfg.b].into_iter().filter(|&x| x > lo && x < hi).collect();
    if end < start {
        inner.reverse();
    }
    cuts.extend(inner);
    cuts.push(end);

    let mut out = SampledWave { r: vec![start], u: vec![u0], du: vec![du0] };
    let (mut u, mut du) = (u0, du0);
    for seg in cuts.windows(2) {
        let (r0, r1) = (seg[0], seg[1]);
        let v = cfg.potential(0.5 * (r0 + r1));
        let coef = c2 * (v - e);
        let scale_q = coef.norm().sqrt().max(1.0);
        let n = ((r1 - r0).abs() / step).ceil().max(1.0) as usize;
        let h = (r1 - r0) / n as f64;
        let rk4 = |u: C64, du: C64, h: f64| {
            // u' = du, du' = coef u
            let k1u = du;
            let k1d = coef * u;
            let k2u = du + 0.5 * h * k1d;
            let k2d = coef * (u + 0.5 * h * k1u);
            let k3u = du + 0.5 * h * k2d;
            let k3d = coef * (u + 0.5 * h * k2u);
            let k4u = du + h * k3d;
            let k4d = coef * (u + h * k3u);
            (
                u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u),
                du + h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d),
            )
        };
        for i in 0..n {
            let (fu, fd) = rk4(u, du, h);
            let (hu, hd) = rk4(u, du, 0.5 * h);
            let (hu, hd) = rk4(hu, hd, 0.5 * h);
            let scale = (hu.norm() + hd.norm() / scale_q).max(f64::MIN_POSITIVE);
            let estimate = ((hu - fu).norm() + (hd - fd).norm() / scale_q) / 15.0 / scale;
            if estimate > tolerance {
                return Err(Error::StepTooLarge { r: r0 + h * i as f64, estimate, tolerance });
            }
            u = hu + (hu - fu) / 15.0;
            du = hd + (hd - fd) / 15.0;
            let r = if i + 1 == n { r1 } else { r0 + h * (i + 1) as f64 };
            out.r.push(r);
            out.u.push(u);
            out.du.push(du);
        }
    }
    Ok(out)
}
