//! Smooth, compactly supported test functions built from mollifier bumps.
//!
//! A bump is `A exp(-1 / (1 - x^2))` with `x = (r - c) / w` on `|x| < 1`. Each
//! bump sits strictly inside one of `(0, a)`, `(a, b)` or `(b, R)`, so every
//! derivative vanishes at `0`, `a` and `b`, and the potential is constant on its
//! support. That makes `H` act on a bump as a constant-coefficient operator.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::coeffs::{compute_coefficients, Sign};
use crate::eigenfuncs::{chi_pm_from, normalization_factor};
use crate::error::{Error, Result};
use crate::quadrature::Tolerance;
use crate::radial::{l2_norm, merge_intervals, RadialFunction};
use crate::units::{ComplexEnergy, PotentialConfig, C64};

/// Highest derivative order the closed-form recursion is trusted for.
pub const MAX_DERIVATIVE_ORDER: usize = 8;

/// Minimum gap between a bump's support and the points `0`, `a`, `b`.
pub const SUPPORT_MARGIN: f64 = 1e-6;

/// Samples used for the sup of `|chi+|` on `(0, 3b]`.
pub const SUP_SAMPLES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "BumpRepr", into = "BumpRepr")]
pub struct Bump {
    pub center: f64,
    pub halfwidth: f64,
    pub amplitude: C64,
}

#[derive(Serialize, Deserialize)]
struct BumpRepr {
    center: f64,
    halfwidth: f64,
    amplitude_re: f64,
    #[serde(default)]
    amplitude_im: f64,
}

impl From<BumpRepr> for Bump {
    fn from(b: BumpRepr) -> Self {
        Bump::new(b.center, b.halfwidth, C64::new(b.amplitude_re, b.amplitude_im))
    }
}

impl From<Bump> for BumpRepr {
    fn from(b: Bump) -> Self {
        BumpRepr { center: b.center, halfwidth: b.halfwidth, amplitude_re: b.amplitude.re, amplitude_im: b.amplitude.im }
    }
}

/// Coefficient polynomials `P_n` with `g^(n)(x) = P_n(x) g(x) / (1 - x^2)^(2n)`.
fn mollifier_polys() -> &'static [Vec<f64>] {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut out = vec![vec![1.0]];
        for n in 0..MAX_DERIVATIVE_ORDER {
            let p = &out[n];
            let mut next = vec![0.0; p.len() + 3];
            // y^2 P'
            for (i, &c) in p.iter().enumerate().skip(1) {
                let d = i as f64 * c;
                next[i - 1] += d;
                next[i + 1] -= 2.0 * d;
                next[i + 3] += d;
            }
            // (4n - 2) x P - 4n x^3 P
            let nn = 4.0 * n as f64;
            for (i, &c) in p.iter().enumerate() {
                next[i + 1] += (nn - 2.0) * c;
                next[i + 3] -= nn * c;
            }
            while next.len() > 1 && next.last() == Some(&0.0) {
                next.pop();
            }
            out.push(next);
        }
        out
    })
}

/// `d^n/dx^n exp(-1/(1-x^2))`, zero outside `(-1, 1)`.
pub fn mollifier_derivative(x: f64, n: usize) -> f64 {
    if !(x.abs() < 1.0) {
        return 0.0;
    }
    let y = 1.0 - x * x;
    let p = &mollifier_polys()[n];
    let poly = p.iter().rev().fold(0.0, |acc, &c| acc * x + c);
    let e = -1.0 / y - 2.0 * n as f64 * y.ln();
    poly * e.exp()
}

impl Bump {
    pub fn new(center: f64, halfwidth: f64, amplitude: C64) -> Self {
        Self { center, halfwidth, amplitude }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.halfwidth, self.center + self.halfwidth)
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self { amplitude: self.amplitude * factor, ..*self }
    }

    /// `n`-th derivative in `r`.
    pub fn derivative(&self, r: f64, n: usize) -> C64 {
        let x = (r - self.center) / self.halfwidth;
        self.amplitude * (mollifier_derivative(x, n) / self.halfwidth.powi(n as i32))
    }

    pub fn value(&self, r: f64) -> C64 {
        self.derivative(r, 0)
    }

    fn check(&self, r_max: f64, cfg: &PotentialConfig) -> Result<()> {
        if !(self.halfwidth > 0.0 && self.center.is_finite() && self.halfwidth.is_finite()) {
            return Err(Error::SupportViolation(format!(
                "bump at {} needs a finite positive halfwidth (got {})",
                self.center, self.halfwidth
            )));
        }
        if !(self.amplitude.re.is_finite() && self.amplitude.im.is_finite()) {
            return Err(Error::SupportViolation(format!("bump at {} has a non-finite amplitude", self.center)));
        }
        let (lo, hi) = self.support();
        let fits = [(0.0, cfg.a), (cfg.a, cfg.b), (cfg.b, r_max)]
            .iter()
            .any(|&(p, q)| lo >= p + SUPPORT_MARGIN && hi <= q - SUPPORT_MARGIN);
        if fits {
            Ok(())
        } else {
            Err(Error::SupportViolation(format!(
                "support [{lo}, {hi}] must lie inside one of (0, {a}), ({a}, {b}), ({b}, {r_max}) with margin {SUPPORT_MARGIN}",
                a = cfg.a,
                b = cfg.b
            )))
        }
    }
}

/// A finite sum of bumps with a declared outer support bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    bumps: Vec<Bump>,
    r_max: f64,
}

impl TestFunction {
    pub fn new(bumps: Vec<Bump>, r_max: f64, cfg: &PotentialConfig) -> Result<Self> {
        let f = Self { bumps, r_max };
        f.validate(cfg)?;
        Ok(f)
    }

    /// Checks every bump against the regions of `cfg`; used after deserialising.
    pub fn validate(&self, cfg: &PotentialConfig) -> Result<()> {
        if !(self.r_max > cfg.b && self.r_max.is_finite()) {
            return Err(Error::SupportViolation(format!("r_max = {} must exceed b = {}", self.r_max, cfg.b)));
        }
        if self.bumps.is_empty() {
            return Err(Error::SupportViolation("test function has no bumps".into()));
        }
        self.bumps.iter().try_for_each(|b| b.check(self.r_max, cfg))
    }

    pub fn bumps(&self) -> &[Bump] {
        &self.bumps
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Rightmost point of the support.
    pub fn support_end(&self) -> f64 {
        self.bumps.iter().map(|b| b.support().1).fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self { bumps: self.bumps.iter().map(|b| b.scaled(factor)).collect(), r_max: self.r_max }
    }

    /// `self + factor * other`.
    pub fn plus(&self, factor: C64, other: &TestFunction) -> Self {
        let mut bumps = self.bumps.clone();
        bumps.extend(other.bumps.iter().map(|b| b.scaled(factor)));
        Self { bumps, r_max: self.r_max.max(other.r_max) }
    }

    pub fn derivative(&self, order: usize) -> Result<BumpOperator> {
        check_order(order)?;
        Ok(BumpOperator {
            bumps: self.bumps.iter().map(|&b| (b, vec![(order, C64::new(1.0, 0.0))])).collect(),
            weight: Weight::One,
        })
    }

    /// `(shift + h)^power` applied bump by bump.
    pub fn apply_shifted_h(&self, cfg: &PotentialConfig, shift: f64, power: usize) -> Result<BumpOperator> {
        check_order(2 * power)?;
        let c2 = cfg.c2();
        let bumps = self
            .bumps
            .iter()
            .map(|&b| {
                let v = cfg.potential(b.center) + shift;
                let mut terms = Vec::with_capacity(power + 1);
                let mut binom = 1.0;
                for j in 0..=power {
                    let coeff = binom * (-1.0 / c2).powi(j as i32) * v.powi((power - j) as i32);
                    if coeff != 0.0 {
                        terms.push((2 * j, C64::new(coeff, 0.0)));
                    }
                    binom = binom * (power - j) as f64 / (j + 1) as f64;
                }
                (b, terms)
            })
            .collect();
        Ok(BumpOperator { bumps, weight: Weight::One })
    }

    pub fn apply_h(&self, cfg: &PotentialConfig, power: usize) -> Result<BumpOperator> {
        self.apply_shifted_h(cfg, 0.0, power)
    }

    /// `||(1 + r)^n (1 + h)^m phi||`.
    pub fn phi_norm(&self, n: u32, m: usize, cfg: &PotentialConfig, tol: Tolerance) -> Result<f64> {
        let mut op = self.apply_shifted_h(cfg, 1.0, m)?;
        op.weight = Weight::OnePlusR(n);
        l2_norm(&op, tol)
    }

    /// `max ||r^k h^m phi||` over `k + m <= n`.
    pub fn dn_norm(&self, n: usize, cfg: &PotentialConfig, tol: Tolerance) -> Result<f64> {
        check_order(2 * n)?;
        let mut best: f64 = 0.0;
        for m in 0..=n {
            for k in 0..=(n - m) {
                let mut op = self.apply_h(cfg, m)?;
                op.weight = Weight::R(k as u32);
                best = best.max(l2_norm(&op, tol)?);
            }
        }
        Ok(best)
    }

    pub fn l2_norm(&self, tol: Tolerance) -> Result<f64> {
        l2_norm(self, tol)
    }
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_DERIVATIVE_ORDER {
        Err(Error::OrderTooHigh { order, max: MAX_DERIVATIVE_ORDER })
    } else {
        Ok(())
    }
}

fn bump_pieces(bumps: impl Iterator<Item = (f64, f64)>) -> Vec<(f64, f64)> {
    merge_intervals(bumps.collect())
}

impl RadialFunction for TestFunction {
    fn value(&self, r: f64) -> C64 {
        self.bumps.iter().map(|b| b.value(r)).sum()
    }

    fn pieces(&self) -> Vec<(f64, f64)> {
        bump_pieces(self.bumps.iter().map(Bump::support))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    One,
    R(u32),
    OnePlusR(u32),
}

impl Weight {
    fn at(self, r: f64) -> f64 {
        match self {
            Weight::One => 1.0,
            Weight::R(k) => r.powi(k as i32),
            Weight::OnePlusR(n) => (1.0 + r).powi(n as i32),
        }
    }
}

/// `w(r) sum_b sum_j c_bj d^j/dr^j bump_b(r)`: derivatives, powers of `h`, and
/// weighted versions of those, all evaluated in closed form.
#[derive(Debug, Clone)]
pub struct BumpOperator {
    bumps: Vec<(Bump, Vec<(usize, C64)>)>,
    weight: Weight,
}

impl BumpOperator {
    pub fn with_weight(mut self, weight: Weight) -> Self {
        self.weight = weight;
        self
    }
}

impl RadialFunction for BumpOperator {
    fn value(&self, r: f64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (b, terms) in &self.bumps {
            let (lo, hi) = b.support();
            if r > lo && r < hi {
                for &(order, c) in terms {
                    acc += c * b.derivative(r, order);
                }
            }
        }
        acc * self.weight.at(r)
    }

    fn pieces(&self) -> Vec<(f64, f64)> {
        bump_pieces(self.bumps.iter().map(|(b, _)| b.support()))
    }
}

/// Estimate of `sup_r |chi+(r; E)|`: dense samples on `(0, 3b]` together with
/// the outer-region bound `N (|J3| + |J4|) / |J+|`.
pub fn continuity_bound(energy: f64, cfg: &PotentialConfig) -> Result<f64> {
    if !(energy > 0.0) {
        return Err(Error::InvalidArgument(format!("continuity bound needs E > 0, got {energy}")));
    }
    let e = ComplexEnergy::from(energy);
    let c = compute_coefficients(e, cfg)?;
    let chi = chi_pm_from(Sign::Plus, &c, cfg);
    let top = 3.0 * cfg.b;
    let sampled = (1..=SUP_SAMPLES)
        .map(|i| chi.value(top * i as f64 / SUP_SAMPLES as f64).norm())
        .fold(0.0, f64::max);
    let n = normalization_factor(e, cfg).norm();
    let outer = n * (c.j3().norm() + c.j4().norm()) / c.jost_plus.norm();
    Ok(sampled.max(outer))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, CompositeRule};

    fn cfg() -> PotentialConfig {
        PotentialConfig::default()
    }

    fn tol() -> Tolerance {
        Tolerance::relative(1e-12)
    }

    #[test]
    fn value_at_center_and_edges() {
        let amp = C64::new(2.0, -1.0);
        let f = TestFunction::new(vec![Bump::new(3.0, 0.5, amp)], 6.0, &cfg()).unwrap();
        assert!((f.value(3.0) - amp * (-1.0f64).exp()).norm() < 1e-15);
        for n in 0..=MAX_DERIVATIVE_ORDER {
            for r in [2.5, 3.5, 2.5 + 1e-9, 3.5 - 1e-9] {
                assert!(f.derivative(n).unwrap().value(r).norm() < 1e-30, "n={n} r={r}");
            }
        }
    }

    #[test]
    fn support_violations() {
        let c = cfg();
        let one = C64::new(1.0, 0.0);
        assert!(matches!(TestFunction::new(vec![Bump::new(1.0, 0.2, one)], 5.0, &c), Err(Error::SupportViolation(_))));
        assert!(matches!(TestFunction::new(vec![Bump::new(0.1, 0.1, one)], 5.0, &c), Err(Error::SupportViolation(_))));
        assert!(matches!(TestFunction::new(vec![Bump::new(1.5, 0.5, one)], 5.0, &c), Err(Error::SupportViolation(_))));
        assert!(matches!(TestFunction::new(vec![Bump::new(4.5, 1.0, one)], 5.0, &c), Err(Error::SupportViolation(_))));
        assert!(TestFunction::new(vec![Bump::new(1.5, 0.49, one)], 5.0, &c).is_ok());
    }

    #[test]
    fn membership_at_special_points() {
        let c = cfg();
        let f = TestFunction::new(
            vec![
                Bump::new(0.5, 0.49, C64::new(1.0, 0.0)),
                Bump::new(1.5, 0.49, C64::new(0.0, 1.0)),
                Bump::new(3.0, 0.99, C64::new(-2.0, 0.5)),
            ],
            5.0,
            &c,
        )
        .unwrap();
        for n in 0..=MAX_DERIVATIVE_ORDER {
            let d = f.derivative(n).unwrap();
            for p in [1e-9, c.a - 1e-9, c.a + 1e-9, c.b - 1e-9, c.b + 1e-9] {
                assert!(d.value(p).norm() < 1e-30);
            }
        }
    }

    #[test]
    fn order_budget_enforced() {
        let f = TestFunction::new(vec![Bump::new(3.0, 0.5, C64::new(1.0, 0.0))], 6.0, &cfg()).unwrap();
        assert!(matches!(f.derivative(9), Err(Error::OrderTooHigh { order: 9, max: 8 })));
        assert!(matches!(f.apply_h(&cfg(), 5), Err(Error::OrderTooHigh { .. })));
        assert!(f.apply_h(&cfg(), 4).is_ok());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let b = Bump::new(3.0, 0.8, C64::new(1.0, 0.3));
        let h = 2e-3;
        for _ in 0..20 {
            let r = rng.gen_range(2.3..3.7);
            let exact = b.derivative(r, 2);
            let fd = crate::green::second_difference(|s| b.value(s), r, h);
            assert!((exact - fd).norm() <= 1e-6 * exact.norm().max(1e-3), "r={r}: {exact} vs {fd}");
        }
    }

    #[test]
    fn recursion_consistent_across_orders() {
        let b = Bump::new(3.0, 0.8, C64::new(1.0, 0.0));
        let fd = |r: f64, n: usize, h: f64| (b.derivative(r + h, n) - b.derivative(r - h, n)) / (2.0 * h);
        for n in 0..MAX_DERIVATIVE_ORDER {
            let scale = (0..200).map(|i| b.derivative(2.2 + 0.008 * i as f64, n + 1).norm()).fold(0.0, f64::max);
            for r in [2.45, 2.9, 3.3, 3.62] {
                let h = 1e-3;
                let rich = (4.0 * fd(r, n, h / 2.0) - fd(r, n, h)) / 3.0;
                let exact = b.derivative(r, n + 1);
                assert!((exact - rich).norm() < 1e-7 * scale, "n={n} r={r}: {exact} vs {rich}");
            }
        }
    }

    #[test]
    fn first_derivative_integrates_to_zero() {
        let f = TestFunction::new(vec![Bump::new(1.5, 0.4, C64::new(1.0, 0.0))], 6.0, &cfg()).unwrap();
        let d = f.derivative(1).unwrap();
        let q = integrate(|r| d.value(r), 1.1, 1.9, &[], tol()).unwrap();
        assert!(q.value.norm() < 1e-14);
    }

    #[test]
    fn h_matches_definition() {
        let c = cfg();
        let shell = TestFunction::new(vec![Bump::new(1.5, 0.4, C64::new(1.0, 0.5))], 6.0, &c).unwrap();
        let h = shell.apply_h(&c, 1).unwrap();
        let d2 = shell.derivative(2).unwrap();
        for r in [1.2, 1.5, 1.77] {
            let expect = -d2.value(r) / c.c2() + c.v0 * shell.value(r);
            assert!((h.value(r) - expect).norm() < 1e-13 * expect.norm().max(1.0));
        }
        let outer = TestFunction::new(vec![Bump::new(3.0, 0.5, C64::new(1.0, 0.0))], 6.0, &c).unwrap();
        let h_out = outer.apply_h(&c, 1).unwrap();
        let d2_out = outer.derivative(2).unwrap();
        assert!((h_out.value(3.1) + d2_out.value(3.1) / c.c2()).norm() < 1e-14);
        // h^2 = h applied twice: V constant, so h^2 = V^2 - 2V d2/c2 + d4/c2^2.
        let h2 = shell.apply_h(&c, 2).unwrap();
        let d4 = shell.derivative(4).unwrap();
        let r = 1.37;
        let expect = c.v0 * c.v0 * shell.value(r) - 2.0 * c.v0 * d2.value(r) / c.c2() + d4.value(r) / (c.c2() * c.c2());
        let scale = c.v0 * c.v0 * shell.value(r).norm() + d4.value(r).norm() / (c.c2() * c.c2());
        assert!((h2.value(r) - expect).norm() < 1e-13 * scale, "{} vs {expect}", h2.value(r));
    }

    #[test]
    fn norms() {
        let c = cfg();
        let f = TestFunction::new(vec![Bump::new(3.0, 0.7, C64::new(1.0, 0.0))], 6.0, &c).unwrap();
        let l2 = f.l2_norm(tol()).unwrap();
        assert!((f.phi_norm(0, 0, &c, tol()).unwrap() - l2).abs() < 1e-14 * l2);
        assert!((f.dn_norm(0, &c, tol()).unwrap() - l2).abs() < 1e-14 * l2);
        assert!(f.phi_norm(1, 0, &c, tol()).unwrap() >= l2);
        assert!(f.dn_norm(2, &c, tol()).unwrap() >= l2);
        let alpha = C64::new(-0.6, 2.0);
        let n1 = f.phi_norm(2, 1, &c, tol()).unwrap();
        let n2 = f.scaled(alpha).phi_norm(2, 1, &c, tol()).unwrap();
        assert!((n2 - alpha.norm() * n1).abs() < 1e-10 * n2);
    }

    #[test]
    fn dn_norm_against_dense_grid() {
        let c = cfg();
        let f = TestFunction::new(vec![Bump::new(4.0, 1.5, C64::new(0.8, -0.4))], 8.0, &c).unwrap();
        let closed = f.dn_norm(2, &c, tol()).unwrap();
        let rule = CompositeRule::new(&crate::quadrature::uniform_cuts(2.5, 5.5, 0.05), 16);
        let mut best: f64 = 0.0;
        for m in 0..=2usize {
            for k in 0..=(2 - m) {
                let op = f.apply_h(&c, m).unwrap().with_weight(Weight::R(k as u32));
                let s: f64 = rule.nodes.iter().zip(&rule.weights).map(|(&r, &w)| w * op.value(r).norm_sqr()).sum();
                best = best.max(s.sqrt());
            }
        }
        assert!((closed - best).abs() < 1e-6 * best);
    }

    #[test]
    fn json_round_trip() {
        let c = cfg();
        let f = TestFunction::new(vec![Bump::new(3.0, 0.5, C64::new(1.0, -2.0))], 6.0, &c).unwrap();
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.contains("amplitude_re") && s.contains("r_max"));
        let g: TestFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn continuity_bound_dominates_bra() {
        let c = cfg();
        let f = TestFunction::new(vec![Bump::new(1.5, 0.45, C64::new(1.0, 0.0))], 6.0, &c).unwrap();
        for e in [0.5, 3.0, 5.0, 20.0] {
            let chi = crate::eigenfuncs::chi_pm(Sign::Plus, e.into(), &c).unwrap();
            let bra = integrate(|r| f.value(r).conj() * chi.value(r), 1.05, 1.95, &[], tol()).unwrap().value;
            let bound = continuity_bound(e, &c).unwrap() * f.phi_norm(1, 0, &c, tol()).unwrap();
            assert!(bra.norm() <= bound);
        }
    }

    #[cfg(test)]
    mod props {
        use super::*;
        use proptest::prelude::*;

        fn bump_in_outer() -> impl Strategy<Value = Bump> {
            (2.6f64..7.0, 0.2f64..0.5, -2.0f64..2.0, -2.0f64..2.0)
                .prop_map(|(c, w, re, im)| Bump::new(c, w, C64::new(re, im)))
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]
            #[test]
            fn triangle_inequality(b1 in bump_in_outer(), b2 in bump_in_outer()) {
                let c = cfg();
                let f = TestFunction::new(vec![b1], 8.0, &c).unwrap();
                let g = TestFunction::new(vec![b2], 8.0, &c).unwrap();
                let sum = f.plus(C64::new(1.0, 0.0), &g);
                let t = Tolerance::relative(1e-10);
                for (n, m) in [(0, 0), (1, 1), (2, 0)] {
                    let lhs = sum.phi_norm(n, m, &c, t).unwrap();
                    let rhs = f.phi_norm(n, m, &c, t).unwrap() + g.phi_norm(n, m, &c, t).unwrap();
                    prop_assert!(lhs <= rhs * (1.0 + 1e-8));
                    prop_assert!(lhs >= 0.0);
                }
            }
        }
    }
}
