//! Gauss-Kronrod adaptive quadrature for complex integrands and composite
//! Gauss-Legendre rules for fixed grids.
//!
//! The adaptive driver follows the QUADPACK `qag` scheme: a 7/15-point pair per
//! interval, the worst interval is bisected until the summed error estimate
//! falls below `max(abs, rel * integral of |f|)`. The tolerance is taken
//! relative to the integral of the modulus rather than the modulus of the
//! integral, so strongly cancelling oscillatory integrals do not force
//! refinement down to round-off.

#![allow(clippy::excessive_precision)]

use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::units::C64;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    /// Maximum number of bisections over the whole call.
    pub max_subdivisions: usize,
}

impl Tolerance {
    pub fn relative(rel: f64) -> Self {
        Self { abs: 0.0, rel, max_subdivisions: 4000 }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::relative(1e-11)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: C64,
    pub error: f64,
    /// Integral of `|f|`.
    pub abs_integral: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: C64,
    error: f64,
    abs: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> C64>(f: &F, lo: f64, hi: f64) -> Segment {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut result_k = fc * WGK[7];
    let mut result_g = fc * WG[3];
    let mut res_abs = fc.norm() * WGK[7];
    let mut fv1 = [C64::new(0.0, 0.0); 7];
    let mut fv2 = [C64::new(0.0, 0.0); 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        result_k += (f1 + f2) * WGK[j];
        res_abs += (f1.norm() + f2.norm()) * WGK[j];
        if j % 2 == 1 {
            result_g += (f1 + f2) * WG[j / 2];
        }
    }
    let mean = result_k * 0.5;
    let mut res_asc = WGK[7] * (fc - mean).norm();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).norm() + (fv2[j] - mean).norm());
    }
    let value = result_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut error = ((result_k - result_g) * half).norm();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (1.0f64).min((200.0 * error / res_asc).powf(1.5));
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Segment { lo, hi, value, error, abs: res_abs }
}

/// Adaptive integral of `f` over `[lo, hi]`, first split at every breakpoint that
/// falls strictly inside the interval.
pub fn integrate<F>(f: F, lo: f64, hi: f64, breakpoints: &[f64], tol: Tolerance) -> Result<QuadResult>
where
    F: Fn(f64) -> C64,
{
    let mut cuts = vec![lo];
    let mut inner: Vec<f64> = breakpoints.iter().copied().filter(|&x| x > lo && x < hi).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    cuts.extend(inner);
    cuts.push(hi);
    integrate_partitioned(f, &cuts, tol)
}

/// Adaptive integral over the consecutive intervals of a sorted partition.
pub fn integrate_partitioned<F>(f: F, cuts: &[f64], tol: Tolerance) -> Result<QuadResult>
where
    F: Fn(f64) -> C64,
{
    if cuts.len() < 2 {
        return Ok(QuadResult { value: C64::new(0.0, 0.0), error: 0.0, abs_integral: 0.0, evaluations: 0 });
    }
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    for w in cuts.windows(2) {
        if w[1] > w[0] {
            heap.push(gk15(&f, w[0], w[1]));
            evaluations += 15;
        }
    }
    let mut bisections = 0;
    loop {
        let (value, error, abs) = heap.iter().fold((C64::new(0.0, 0.0), 0.0, 0.0), |acc, s| {
            (acc.0 + s.value, acc.1 + s.error, acc.2 + s.abs)
        });
        let target = tol.abs.max(tol.rel * abs).max(60.0 * f64::EPSILON * abs);
        if error <= target || abs == 0.0 {
            return Ok(QuadResult { value, error, abs_integral: abs, evaluations });
        }
        let worst = match heap.pop() {
            Some(s) => s,
            None => unreachable!("heap holds at least one segment"),
        };
        let mid = 0.5 * (worst.lo + worst.hi);
        if bisections >= tol.max_subdivisions || mid <= worst.lo || mid >= worst.hi {
            return Err(Error::QuadratureFailure {
                lo: cuts[0],
                hi: cuts[cuts.len() - 1],
                estimate: error,
                tolerance: target,
            });
        }
        heap.push(gk15(&f, worst.lo, mid));
        heap.push(gk15(&f, mid, worst.hi));
        evaluations += 30;
        bisections += 1;
    }
}

/// Splits `[lo, hi]` into pieces no longer than `max_len` (at least one piece).
pub fn uniform_cuts(lo: f64, hi: f64, max_len: f64) -> Vec<f64> {
    let n = if max_len.is_finite() && max_len > 0.0 { ((hi - lo) / max_len).ceil().max(1.0) as usize } else { 1 };
    (0..=n).map(|i| if i == n { hi } else { lo + (hi - lo) * i as f64 / n as f64 }).collect()
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "a Gauss rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=n {
        let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Composite Gauss-Legendre rule over the panels of a sorted partition.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CompositeRule {
    pub fn new(cuts: &[f64], order: usize) -> Self {
        let (x, w) = gauss_legendre(order);
        let mut nodes = Vec::with_capacity(cuts.len().saturating_sub(1) * order);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for p in cuts.windows(2) {
            let (lo, hi) = (p[0], p[1]);
            if hi <= lo {
                continue;
            }
            let c = 0.5 * (lo + hi);
            let h = 0.5 * (hi - lo);
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(c + h * xi);
                weights.push(h * wi);
            }
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}
