//! Radial functions: analytic ones known through point evaluation, and sampled
//! ones living on a composite Gauss-Legendre grid.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_partitioned, uniform_cuts, CompositeRule, Tolerance};
use crate::units::{PotentialConfig, C64};

/// A function of `r >= 0` that vanishes outside the union of [`pieces`], and is
/// smooth inside each piece.
///
/// [`pieces`]: RadialFunction::pieces
pub trait RadialFunction: Sync {
    fn value(&self, r: f64) -> C64;

    /// Sorted, non-overlapping intervals covering the support.
    fn pieces(&self) -> Vec<(f64, f64)>;
}

impl<F: RadialFunction + ?Sized> RadialFunction for &F {
    fn value(&self, r: f64) -> C64 {
        (**self).value(r)
    }
    fn pieces(&self) -> Vec<(f64, f64)> {
        (**self).pieces()
    }
}

/// Merges overlapping intervals.
pub fn merge_intervals(mut v: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    v.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
    for (lo, hi) in v {
        match out.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => out.push((lo, hi)),
        }
    }
    out
}

/// `int |f|^2` over the pieces, adaptively.
pub fn l2_norm<F: RadialFunction + ?Sized>(f: &F, tol: Tolerance) -> Result<f64> {
    let mut total = 0.0;
    for (lo, hi) in f.pieces() {
        let q = integrate_partitioned(|r| C64::new(f.value(r).norm_sqr(), 0.0), &uniform_cuts(lo, hi, (hi - lo) / 8.0), tol)?;
        total += q.value.re;
    }
    Ok(total.sqrt())
}

/// `int conj(f) g` over the common support.
pub fn inner_product<F, G>(f: &F, g: &G, tol: Tolerance) -> Result<C64>
where
    F: RadialFunction + ?Sized,
    G: RadialFunction + ?Sized,
{
    let fp = f.pieces();
    let gp = g.pieces();
    let mut total = C64::new(0.0, 0.0);
    for &(a0, a1) in &fp {
        for &(b0, b1) in &gp {
            let (lo, hi) = (a0.max(b0), a1.min(b1));
            if hi > lo {
                let mut cuts = uniform_cuts(lo, hi, (hi - lo) / 8.0);
                for p in fp.iter().chain(&gp) {
                    for x in [p.0, p.1] {
                        if x > lo && x < hi {
                            cuts.push(x);
                        }
                    }
                }
                cuts.sort_by(f64::total_cmp);
                cuts.dedup();
                total += integrate_partitioned(|r| f.value(r).conj() * g.value(r), &cuts, tol)?.value;
            }
        }
    }
    Ok(total)
}

/// Composite Gauss-Legendre grid on `(0, r_max)` with panel breaks at `a` and `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    pub rule: CompositeRule,
    /// Panel boundaries; panel `p` holds nodes `p * PANEL_ORDER ..`.
    pub cuts: Vec<f64>,
    pub r_max: f64,
}

/// Points per panel of every composite grid in the crate.
pub const PANEL_ORDER: usize = 16;

impl RadialGrid {
    /// Panels no wider than `max_panel`, and broken at `a`, `b`, and `extra_breaks`.
    pub fn new(r_max: f64, max_panel: f64, cfg: &PotentialConfig, extra_breaks: &[f64]) -> Result<Self> {
        if !(r_max > 0.0) || !(max_panel > 0.0) {
            return Err(Error::InvalidArgument(format!("bad radial grid r_max={r_max}, panel={max_panel}")));
        }
        let mut breaks = vec![0.0, r_max];
        for x in [cfg.a, cfg.b].iter().chain(extra_breaks) {
            if *x > 0.0 && *x < r_max {
                breaks.push(*x);
            }
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let mut cuts = vec![0.0];
        for w in breaks.windows(2) {
            let c = uniform_cuts(w[0], w[1], max_panel);
            cuts.extend_from_slice(&c[1..]);
        }
        Ok(Self { rule: CompositeRule::new(&cuts, PANEL_ORDER), cuts, r_max })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.rule.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.rule.weights
    }

    pub fn len(&self) -> usize {
        self.rule.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rule.is_empty()
    }
}

/// Values of a function at the nodes of a [`RadialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSamples {
    pub grid: Arc<RadialGrid>,
    pub values: Vec<C64>,
}

impl RadialSamples {
    pub fn sample<F: RadialFunction + ?Sized>(f: &F, grid: Arc<RadialGrid>) -> Self {
        let values = grid.nodes().iter().map(|&r| f.value(r)).collect();
        Self { grid, values }
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let values = vec![C64::new(0.0, 0.0); grid.len()];
        Self { grid, values }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().zip(self.grid.weights()).map(|(v, w)| w * v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `sum w conj(self) other`.
    pub fn inner(&self, other: &RadialSamples) -> Result<C64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .zip(self.grid.weights())
            .map(|((a, b), w)| a.conj() * b * *w)
            .sum())
    }

    pub fn distance(&self, other: &RadialSamples) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .zip(self.grid.weights())
            .map(|((a, b), w)| w * (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    pub fn distance_to<F: RadialFunction + ?Sized>(&self, f: &F) -> f64 {
        self.values
            .iter()
            .zip(self.grid.nodes())
            .zip(self.grid.weights())
            .map(|((v, &r), w)| w * (v - f.value(r)).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| v * factor).collect() }
    }

    pub fn combine(&self, alpha: C64, other: &RadialSamples, beta: C64) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| alpha * a + beta * b).collect(),
        })
    }

    /// Squared mass on nodes with `r < radius`.
    pub fn mass_below(&self, radius: f64) -> f64 {
        self.values
            .iter()
            .zip(self.grid.nodes())
            .zip(self.grid.weights())
            .filter(|((_, &r), _)| r < radius)
            .map(|((v, _), w)| w * v.norm_sqr())
            .sum()
    }

    fn check_same_grid(&self, other: &RadialSamples) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::InvalidArgument("sampled functions live on different grids".into()))
        }
    }
}
