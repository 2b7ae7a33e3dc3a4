//! Unit conventions, the principal square-root branch and the two wave numbers.
//!
//! Every energy-dependent quantity in the crate goes through [`branch_sqrt`], whose
//! cut lies on the negative real axis with the upper lip included: arguments in
//! `(-pi, pi]` map to arguments in `(-pi/2, pi/2]`. With that convention
//! `conj(sqrt(conj(z))) == sqrt(z)` holds everywhere off the cut.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);

/// Shell geometry, strength and unit constants.
///
/// The potential is `V0` on `a < r < b` and zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PotentialConfig {
    pub a: f64,
    pub b: f64,
    pub v0: f64,
    pub hbar: f64,
    pub mass: f64,
}

impl Default for PotentialConfig {
    /// `a = 1`, `b = 2`, `V0 = 4` with `hbar = 1`, `2m = 1`.
    fn default() -> Self {
        Self { a: 1.0, b: 2.0, v0: 4.0, hbar: 1.0, mass: 0.5 }
    }
}

/// Which of the three constant-potential regions a radius falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Inner,
    Shell,
    Outer,
}

impl Region {
    pub fn index(self) -> usize {
        match self {
            Region::Inner => 0,
            Region::Shell => 1,
            Region::Outer => 2,
        }
    }
}

impl PotentialConfig {
    /// Shell with `hbar = 1`, `2m = 1`.
    pub fn new(a: f64, b: f64, v0: f64) -> Result<Self> {
        Self::with_units(a, b, v0, 1.0, 0.5)
    }

    pub fn with_units(a: f64, b: f64, v0: f64, hbar: f64, mass: f64) -> Result<Self> {
        let cfg = Self { a, b, v0, hbar, mass };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.a, self.b, self.v0, self.hbar, self.mass].iter().all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidConfig("all parameters must be finite".into()));
        }
        if !(self.a > 0.0 && self.b > self.a) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < a < b, got a={}, b={}",
                self.a, self.b
            )));
        }
        if self.v0 < 0.0 {
            return Err(Error::InvalidConfig(format!("V0 must be >= 0, got {}", self.v0)));
        }
        if !(self.hbar > 0.0 && self.mass > 0.0) {
            return Err(Error::InvalidConfig("hbar and mass must be positive".into()));
        }
        let c2 = self.c2();
        if !(c2.is_finite() && c2 > 0.0) {
            return Err(Error::InvalidConfig(format!("2m/hbar^2 = {c2} is not a positive finite number")));
        }
        Ok(())
    }

    /// `2m / hbar^2`.
    pub fn c2(&self) -> f64 {
        2.0 * self.mass / (self.hbar * self.hbar)
    }

    /// Same geometry and units with a different strength.
    pub fn with_v0(&self, v0: f64) -> Self {
        Self { v0, ..*self }
    }

    pub fn region(&self, r: f64) -> Region {
        if r < self.a {
            Region::Inner
        } else if r < self.b {
            Region::Shell
        } else {
            Region::Outer
        }
    }

    pub fn potential(&self, r: f64) -> f64 {
        match self.region(r) {
            Region::Shell => self.v0,
            _ => 0.0,
        }
    }

    pub fn region_potential(&self, region: Region) -> f64 {
        match region {
            Region::Shell => self.v0,
            _ => 0.0,
        }
    }

    /// Group velocity `hbar k / m` of a free component with wave number `k`.
    pub fn velocity(&self, k: f64) -> f64 {
        self.hbar * k / self.mass
    }

    /// FNV-1a over the bit patterns of the five parameters, for sidecar files.
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for x in [self.a, self.b, self.v0, self.hbar, self.mass] {
            for byte in x.to_bits().to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        format!("{h:016x}")
    }
}

/// A complex energy with the imaginary zero normalised to `+0.0`, so that negative
/// real energies sit on the upper lip of the cut (`arg = pi`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexEnergy(C64);

impl ComplexEnergy {
    pub fn new(re: f64, im: f64) -> Self {
        Self(canonical(C64::new(re, im)))
    }

    pub fn value(self) -> C64 {
        self.0
    }

    pub fn re(self) -> f64 {
        self.0.re
    }

    pub fn im(self) -> f64 {
        self.0.im
    }

    /// Argument in `(-pi, pi]`.
    pub fn arg(self) -> f64 {
        self.0.im.atan2(self.0.re)
    }

    pub fn conj(self) -> Self {
        Self::new(self.0.re, -self.0.im)
    }

    pub fn is_real(self) -> bool {
        self.0.im == 0.0
    }
}

impl From<f64> for ComplexEnergy {
    fn from(e: f64) -> Self {
        Self::new(e, 0.0)
    }
}

impl From<C64> for ComplexEnergy {
    fn from(e: C64) -> Self {
        Self(canonical(e))
    }
}

fn canonical(z: C64) -> C64 {
    // -0.0 would put a negative real number on the lower lip under atan2
    if z.im == 0.0 {
        C64::new(z.re, 0.0)
    } else {
        z
    }
}

/// Principal square root with `arg(z)` taken in `(-pi, pi]`.
pub fn branch_sqrt(z: C64) -> C64 {
    let (x, y) = (z.re, z.im);
    if y == 0.0 {
        return if x >= 0.0 { C64::new(x.sqrt(), 0.0) } else { C64::new(0.0, (-x).sqrt()) };
    }
    // |z| via hypot avoids overflow; t = sqrt((|z| + |x|) / 2) is never cancelled
    let t = ((x.abs() + x.hypot(y)) / 2.0).sqrt();
    if x >= 0.0 {
        C64::new(t, y / (2.0 * t))
    } else {
        C64::new(y.abs() / (2.0 * t), t.copysign(y))
    }
}

/// `k = sqrt(2m E / hbar^2)`.
pub fn wave_number(energy: ComplexEnergy, cfg: &PotentialConfig) -> C64 {
    branch_sqrt(cfg.c2() * energy.value())
}

/// `kappa = sqrt(2m (E - V0) / hbar^2)`, the wave number inside the shell.
pub fn kappa(energy: ComplexEnergy, cfg: &PotentialConfig) -> C64 {
    branch_sqrt(cfg.c2() * (energy.value() - cfg.v0))
}

/// Local wave number in a region.
pub fn local_wave_number(energy: ComplexEnergy, region: Region, cfg: &PotentialConfig) -> C64 {
    branch_sqrt(cfg.c2() * (energy.value() - cfg.region_potential(region)))
}

/// Shortest decimal that parses back to `x` exactly, in exponent form outside
/// `1e-5 <= |x| < 1e16`.
pub fn format_shortest(x: f64) -> String {
    let m = x.abs();
    if m != 0.0 && m.is_finite() && !(1e-5..1e16).contains(&m) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// Comma-joined [`format_shortest`] values.
pub fn csv_row(values: &[f64]) -> String {
    values.iter().map(|&x| format_shortest(x)).collect::<Vec<_>>().join(",")
}
