//! The energy-representation transforms `U+`, `U-`, `U0` and their inverses.
//!
//! ```text
//! (U f)(E) = int_0^inf f(r) conj(chi(r; E)) dr,      f(r) = int_0^inf (U f)(E) chi(r; E) dE
//! ```
//!
//! with `chi` one of `chi+`, `chi-` or the free `chi0 = N sin(kr)`. Energy
//! integrals run on composite Gauss-Legendre panels in `k = sqrt(c2 E)`, where
//! `dE = 2k/c2 dk` removes the `E^{-1/2}` singularity of `N(E)^2` at threshold.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::Sign;
use crate::eigenfuncs::{chi_pm, free_chi0, PiecewiseWave};
use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, integrate_partitioned, uniform_cuts, CompositeRule, Tolerance};
use crate::radial::{RadialFunction, RadialGrid, RadialSamples, PANEL_ORDER};
use crate::testspace::TestFunction;
use crate::units::{ComplexEnergy, PotentialConfig, C64};

/// Spectral tail `k w` beyond which a bump of halfwidth `w` carries relative
/// mass below `1e-12`; round trips at `1e-6` need this.
pub const ROUND_TRIP_OMEGA: f64 = 160.0;

/// Tail `k w` with relative mass near `1e-7`, enough for norms at `1e-6`.
pub const NORM_OMEGA: f64 = 60.0;

/// Widest energy panel in `k`, to resolve the structure of `S(E)`.
const MAX_K_PANEL: f64 = 0.5;

/// Widest radial panel.
const MAX_R_PANEL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    Plus,
    Minus,
    Zero,
}

impl TransformKind {
    pub fn wave(self, energy: f64, cfg: &PotentialConfig) -> Result<PiecewiseWave> {
        let e = ComplexEnergy::from(energy);
        match self {
            TransformKind::Plus => chi_pm(Sign::Plus, e, cfg),
            TransformKind::Minus => chi_pm(Sign::Minus, e, cfg),
            TransformKind::Zero => free_chi0(e, cfg),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TransformKind::Plus => "plus",
            TransformKind::Minus => "minus",
            TransformKind::Zero => "zero",
        }
    }
}

impl From<Sign> for TransformKind {
    fn from(s: Sign) -> Self {
        match s {
            Sign::Plus => TransformKind::Plus,
            Sign::Minus => TransformKind::Minus,
        }
    }
}

impl std::str::FromStr for TransformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plus" | "+" => Ok(TransformKind::Plus),
            "minus" | "-" => Ok(TransformKind::Minus),
            "zero" | "free" | "0" => Ok(TransformKind::Zero),
            other => Err(Error::InvalidArgument(format!("unknown transform kind {other:?}"))),
        }
    }
}

/// Energy nodes with quadrature weights for `int dE`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyGrid {
    pub energies: Vec<f64>,
    pub weights: Vec<f64>,
}

impl EnergyGrid {
    /// Gauss-Legendre panels in `k` on `(0, k_max)`; `panel(k)` bounds the panel
    /// width starting at `k`, and panels also break at `k_breaks`.
    pub fn gauss_in_k<P: Fn(f64) -> f64>(k_max: f64, panel: P, k_breaks: &[f64], cfg: &PotentialConfig) -> Result<Self> {
        if !(k_max > 0.0 && k_max.is_finite()) {
            return Err(Error::InvalidArgument(format!("k_max must be positive and finite, got {k_max}")));
        }
        let mut stops: Vec<f64> = k_breaks.iter().copied().filter(|&k| k > 0.0 && k < k_max).collect();
        stops.push(k_max);
        stops.sort_by(f64::total_cmp);
        stops.dedup();
        let mut cuts = vec![0.0];
        let mut k = 0.0;
        for &stop in &stops {
            while k < stop {
                let width = panel(k).min(MAX_K_PANEL);
                if !(width > 0.0) {
                    return Err(Error::InvalidArgument(format!("non-positive energy panel at k = {k}")));
                }
                // even panels up to the next stop
                let n = ((stop - k) / width).ceil().max(1.0);
                let step = (stop - k) / n;
                k = if n <= 1.0 { stop } else { k + step };
                cuts.push(k);
            }
        }
        let rule = CompositeRule::new(&cuts, PANEL_ORDER);
        let c2 = cfg.c2();
        let energies = rule.nodes.iter().map(|k| k * k / c2).collect();
        let weights = rule.nodes.iter().zip(&rule.weights).map(|(k, w)| 2.0 * k / c2 * w).collect();
        Ok(Self { energies, weights })
    }

    /// `n` log-spaced energies on `[e_min, e_max]` with trapezoid weights in `ln E`.
    pub fn log_spaced(e_min: f64, e_max: f64, n: usize) -> Result<Self> {
        check_range(e_min, e_max, n)?;
        let (l0, l1) = (e_min.ln(), e_max.ln());
        let h = (l1 - l0) / (n - 1) as f64;
        let energies: Vec<f64> =
            (0..n).map(|i| match i { 0 => e_min, _ if i == n - 1 => e_max, _ => (l0 + h * i as f64).exp() }).collect();
        let weights = energies
            .iter()
            .enumerate()
            .map(|(i, e)| e * h * if i == 0 || i == n - 1 { 0.5 } else { 1.0 })
            .collect();
        Ok(Self { energies, weights })
    }

    /// `n` equally spaced energies on `[e_min, e_max]` with trapezoid weights.
    pub fn linear(e_min: f64, e_max: f64, n: usize) -> Result<Self> {
        check_range(e_min, e_max, n)?;
        let h = (e_max - e_min) / (n - 1) as f64;
        let energies = (0..n).map(|i| if i == n - 1 { e_max } else { e_min + h * i as f64 }).collect();
        let weights = (0..n).map(|i| h * if i == 0 || i == n - 1 { 0.5 } else { 1.0 }).collect();
        Ok(Self { energies, weights })
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn e_min(&self) -> f64 {
        self.energies.first().copied().unwrap_or(f64::NAN)
    }

    pub fn e_max(&self) -> f64 {
        self.energies.last().copied().unwrap_or(f64::NAN)
    }
}

fn check_range(e_min: f64, e_max: f64, n: usize) -> Result<()> {
    if !(e_min > 0.0 && e_max > e_min && e_max.is_finite()) || n < 2 {
        return Err(Error::InvalidArgument(format!("need 0 < E_min < E_max and n >= 2 (got {e_min}, {e_max}, {n})")));
    }
    Ok(())
}

/// A function of energy on an [`EnergyGrid`], tagged with the transform that made it.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyProfile {
    pub grid: Arc<EnergyGrid>,
    pub values: Vec<C64>,
    pub kind: TransformKind,
}

/// Metadata written next to a profile CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSidecar {
    pub kind: TransformKind,
    #[serde(rename = "cfg-hash")]
    pub cfg_hash: String,
    #[serde(rename = "E_min")]
    pub e_min: f64,
    #[serde(rename = "E_max")]
    pub e_max: f64,
    pub tolerance: f64,
}

impl EnergyProfile {
    pub fn zeros(grid: Arc<EnergyGrid>, kind: TransformKind) -> Self {
        let values = vec![C64::new(0.0, 0.0); grid.len()];
        Self { grid, values, kind }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().zip(&self.grid.weights).map(|(v, w)| w * v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `sum w conj(self) other`.
    pub fn inner(&self, other: &EnergyProfile) -> Result<C64> {
        self.check_same_grid(other)?;
        Ok(self.values.iter().zip(&other.values).zip(&self.grid.weights).map(|((a, b), w)| a.conj() * b * *w).sum())
    }

    pub fn distance(&self, other: &EnergyProfile) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .zip(&self.grid.weights)
            .map(|((a, b), w)| w * (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    /// Largest node-wise `|self - other|`.
    pub fn max_difference(&self, other: &EnergyProfile) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    /// Node-wise multiplication by `g(E)`.
    pub fn multiply<G: Fn(f64) -> C64>(&self, g: G) -> Self {
        let values = self.values.iter().zip(&self.grid.energies).map(|(v, &e)| v * g(e)).collect();
        Self { grid: self.grid.clone(), values, kind: self.kind }
    }

    pub fn scaled(&self, factor: C64) -> Self {
        self.multiply(|_| factor)
    }

    pub fn with_kind(mut self, kind: TransformKind) -> Self {
        self.kind = kind;
        self
    }

    /// The profile value at the node nearest to `energy`; the energy-space bra
    /// `<E|` acting on a profile.
    pub fn value_at_node(&self, energy: f64) -> Option<(f64, C64)> {
        let e = &self.grid.energies;
        let i = match e.binary_search_by(|x| x.total_cmp(&energy)) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i >= e.len() => e.len().checked_sub(1)?,
            Err(i) => {
                if energy - e[i - 1] < e[i] - energy {
                    i - 1
                } else {
                    i
                }
            }
        };
        Some((e[i], self.values[i]))
    }

    /// Relative norm carried by the top 5% of the `k` range.
    pub fn tail_fraction(&self, cfg: &PotentialConfig) -> f64 {
        let k_top = (cfg.c2() * self.grid.e_max()).sqrt();
        let e_cut = (0.95 * k_top).powi(2) / cfg.c2();
        let tail: f64 = self
            .values
            .iter()
            .zip(&self.grid.energies)
            .zip(&self.grid.weights)
            .filter(|((_, &e), _)| e > e_cut)
            .map(|((v, _), w)| w * v.norm_sqr())
            .sum();
        let total = self.norm();
        if total > 0.0 {
            tail.sqrt() / total
        } else {
            0.0
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "E,weight,value_re,value_im")?;
        for ((e, w), v) in self.grid.energies.iter().zip(&self.grid.weights).zip(&self.values) {
            writeln!(out, "{}", crate::units::csv_row(&[*e, *w, v.re, v.im]))?;
        }
        Ok(())
    }

    pub fn sidecar(&self, cfg: &PotentialConfig, tolerance: f64) -> ProfileSidecar {
        ProfileSidecar {
            kind: self.kind,
            cfg_hash: cfg.fingerprint(),
            e_min: self.grid.e_min(),
            e_max: self.grid.e_max(),
            tolerance,
        }
    }

    fn check_same_grid(&self, other: &EnergyProfile) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::InvalidArgument("profiles live on different energy grids".into()))
        }
    }
}

/// Options for sizing a [`TransformPlan`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanOptions {
    /// Spectral cutoff `k_max * w_min`.
    pub omega: f64,
    /// Largest `|t|` the plan must represent.
    pub time_span: f64,
    /// Extra radial room beyond the support and the travelled distance.
    pub margin: f64,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self { omega: ROUND_TRIP_OMEGA, time_span: 0.0, margin: 2.0 }
    }
}

impl PlanOptions {
    pub fn round_trip() -> Self {
        Self::default()
    }

    pub fn evolution(time_span: f64) -> Self {
        Self { omega: NORM_OMEGA, time_span: time_span.abs(), margin: 2.0 }
    }
}

/// Matched energy and radial grids for one family of states.
#[derive(Debug, Clone)]
pub struct TransformPlan {
    pub energy: Arc<EnergyGrid>,
    pub radial: Arc<RadialGrid>,
    pub k_max: f64,
    pub time_span: f64,
}

impl TransformPlan {
    pub fn for_function(f: &TestFunction, cfg: &PotentialConfig, opts: PlanOptions) -> Result<Self> {
        let w_min = f.bumps().iter().map(|b| b.halfwidth).fold(f64::INFINITY, f64::min);
        Self::build(f.support_end(), w_min, cfg, opts)
    }

    /// Grids for states supported in `(0, support_end)` and built from bumps no
    /// narrower than `min_halfwidth`.
    pub fn build(support_end: f64, min_halfwidth: f64, cfg: &PotentialConfig, opts: PlanOptions) -> Result<Self> {
        if !(min_halfwidth > 0.0 && support_end > 0.0 && opts.omega > 0.0 && opts.margin >= 0.0) {
            return Err(Error::InvalidArgument("transform plan needs positive support, halfwidth and omega".into()));
        }
        let k_max = opts.omega / min_halfwidth;
        let t = opts.time_span.abs();
        let reach = support_end.max(cfg.b) + opts.margin;
        let r_max = reach + cfg.velocity(k_max) * t;
        // the k-integrand oscillates like exp(i k (r + s) - i k^2 t / (c2 hbar))
        let span = reach + r_max;
        let panel = |k: f64| 2.0 * PI / (span + cfg.velocity(k) * t);
        let k_barrier = if cfg.v0 > 0.0 { vec![(cfg.c2() * cfg.v0).sqrt()] } else { vec![] };
        let energy = EnergyGrid::gauss_in_k(k_max, panel, &k_barrier, cfg)?;
        let r_panel = (1.5 * PI / k_max).min(MAX_R_PANEL);
        let radial = RadialGrid::new(r_max, r_panel, cfg, &[])?;
        Ok(Self { energy: Arc::new(energy), radial: Arc::new(radial), k_max, time_span: t })
    }

    /// Largest phase step `dE t / hbar` between neighbouring energy nodes at time `t`.
    pub fn max_phase_step(&self, t: f64, cfg: &PotentialConfig) -> f64 {
        self.energy.energies.windows(2).map(|w| (w[1] - w[0]) * t.abs() / cfg.hbar).fold(0.0, f64::max)
    }
}

fn waves(kind: TransformKind, grid: &EnergyGrid, cfg: &PotentialConfig) -> Result<Vec<PiecewiseWave>> {
    grid.energies.par_iter().map(|&e| kind.wave(e, cfg)).collect()
}

/// Composite rule over the support of `f`, fine enough for waves up to `k_max`.
fn support_panels<F: RadialFunction + ?Sized>(f: &F, k_max: f64, cfg: &PotentialConfig) -> Vec<(f64, f64)> {
    let panel = (1.5 * PI / k_max).min(MAX_R_PANEL);
    let mut panels = Vec::new();
    for (lo, hi) in f.pieces() {
        let mut breaks = vec![lo, hi];
        breaks.extend([cfg.a, cfg.b].iter().filter(|&&x| x > lo && x < hi));
        breaks.sort_by(f64::total_cmp);
        for w in breaks.windows(2) {
            // the flat edges of a bump need about 32 panels per piece
            let c = uniform_cuts(w[0], w[1], panel.min((w[1] - w[0]) / 32.0));
            panels.extend(panels_of(&c).into_iter().filter(|p| p.1 > p.0));
        }
    }
    panels
}

/// `(U f)(E)` at every node of `grid`, for a function known in closed form.
pub fn forward<F: RadialFunction + ?Sized>(
    kind: TransformKind,
    f: &F,
    grid: Arc<EnergyGrid>,
    cfg: &PotentialConfig,
) -> Result<EnergyProfile> {
    let k_max = (cfg.c2() * grid.e_max()).sqrt();
    let panels = support_panels(f, k_max, cfg);
    let (x, w) = gauss_legendre(PANEL_ORDER);
    let mut nodes = Vec::with_capacity(panels.len() * PANEL_ORDER);
    let mut fw = Vec::with_capacity(nodes.capacity());
    for &(lo, hi) in &panels {
        let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        for (xi, wi) in x.iter().zip(&w) {
            let r = c + h * xi;
            nodes.push(r);
            fw.push(f.value(r) * (h * wi));
        }
    }
    forward_panels(kind, &panels, &nodes, &fw, grid, cfg)
}

/// `(U f)(E)` for a sampled function, using the radial grid weights.
pub fn forward_sampled(
    kind: TransformKind,
    f: &RadialSamples,
    grid: Arc<EnergyGrid>,
    cfg: &PotentialConfig,
) -> Result<EnergyProfile> {
    let fw: Vec<C64> = f.values.iter().zip(f.grid.weights()).map(|(v, w)| v * w).collect();
    forward_panels(kind, &panels_of(&f.grid.cuts), f.grid.nodes(), &fw, grid, cfg)
}

/// `sum_j fw_j conj(chi(r_j; E))` over Gauss panels; `nodes` lists `PANEL_ORDER`
/// nodes per panel in order.
fn forward_panels(
    kind: TransformKind,
    panels: &[(f64, f64)],
    nodes: &[f64],
    fw: &[C64],
    grid: Arc<EnergyGrid>,
    cfg: &PotentialConfig,
) -> Result<EnergyProfile> {
    let (x, _) = gauss_legendre(PANEL_ORDER);
    let inner: Vec<usize> = panels
        .iter()
        .enumerate()
        .filter(|(_, p)| p.0 < cfg.b)
        .flat_map(|(p, _)| p * PANEL_ORDER..(p + 1) * PANEL_ORDER)
        .collect();
    let values = grid
        .energies
        .par_iter()
        .map(|&e| {
            let chi = kind.wave(e, cfg)?;
            let mut total: C64 = inner.iter().map(|&j| fw[j] * chi.value(nodes[j]).conj()).sum();
            match real_k(&chi) {
                Some(k) => {
                    let outer = chi.pieces[2];
                    let (u0, s0) = (outer.value.conj(), outer.slope.conj() / k);
                    outer_phases(panels, &x, cfg.b, k, |j, z| total += fw[j] * (u0 * z.re + s0 * z.im));
                }
                None => {
                    for (p, &(lo, _)) in panels.iter().enumerate() {
                        if lo >= cfg.b {
                            for j in p * PANEL_ORDER..(p + 1) * PANEL_ORDER {
                                total += fw[j] * chi.value(nodes[j]).conj();
                            }
                        }
                    }
                }
            }
            Ok(total)
        })
        .collect::<Result<Vec<C64>>>()?;
    Ok(EnergyProfile { grid, values, kind })
}

#[cfg(test)]
fn forward_nodes(
    kind: TransformKind,
    fw: &[(f64, C64)],
    grid: Arc<EnergyGrid>,
    cfg: &PotentialConfig,
) -> Result<EnergyProfile> {
    let values = grid
        .energies
        .par_iter()
        .map(|&e| {
            let chi = kind.wave(e, cfg)?;
            Ok(fw.iter().map(|&(r, v)| v * chi.value(r).conj()).sum())
        })
        .collect::<Result<Vec<C64>>>()?;
    Ok(EnergyProfile { grid, values, kind })
}

/// `f(r) = sum_E w (U f)(E) chi(r; E)` at each of `r_nodes`.
pub fn inverse(profile: &EnergyProfile, r_nodes: &[f64], cfg: &PotentialConfig, tolerance: f64) -> Result<Vec<C64>> {
    inverse_with(profile, r_nodes, cfg, tolerance, PiecewiseWave::value)
}

/// `f'(r)`, from the same energy sum with the derivative of each wave.
pub fn inverse_derivative(
    profile: &EnergyProfile,
    r_nodes: &[f64],
    cfg: &PotentialConfig,
    tolerance: f64,
) -> Result<Vec<C64>> {
    inverse_with(profile, r_nodes, cfg, tolerance, PiecewiseWave::derivative)
}

fn inverse_with(
    profile: &EnergyProfile,
    r_nodes: &[f64],
    cfg: &PotentialConfig,
    tolerance: f64,
    eval: fn(&PiecewiseWave, f64) -> C64,
) -> Result<Vec<C64>> {
    if let Some(r) = r_nodes.iter().find(|r| !(**r >= 0.0)) {
        return Err(Error::InvalidArgument(format!("inverse transform needs r >= 0, got {r}")));
    }
    let tail = profile.tail_fraction(cfg);
    if tail > tolerance / 10.0 {
        log::warn!(
            "truncation: {:.3e} of the profile norm sits in the top 5% of k below E_max = {:.6e} (tolerance {:.1e})",
            tail,
            profile.grid.e_max(),
            tolerance
        );
    }
    let weighted: Vec<(PiecewiseWave, C64)> = waves(profile.kind, &profile.grid, cfg)?
        .into_iter()
        .zip(profile.values.iter().zip(&profile.grid.weights))
        .filter(|(_, (v, _))| **v != C64::new(0.0, 0.0))
        .map(|(w, (v, q))| (w, v * q))
        .collect();
    Ok(r_nodes.par_iter().map(|&r| weighted.iter().map(|(w, c)| c * eval(w, r)).sum()).collect())
}

/// Visits the nodes of the panels in `panels` that lie at or beyond `b`,
/// passing the node index (counted from the first panel given) and `exp(i k (r - b))`.
///
/// Node offsets within a panel are shared by every panel of the same width, so
/// each panel costs one complex exponential.
fn outer_phases<V: FnMut(usize, C64)>(panels: &[(f64, f64)], x: &[f64], b: f64, k: f64, mut visit: V) {
    let mut base = [C64::new(0.0, 0.0); PANEL_ORDER];
    let mut width = f64::NAN;
    let mut step = C64::new(1.0, 0.0);
    let mut start = C64::new(1.0, 0.0);
    let mut since_exact = usize::MAX;
    let mut prev_hi = f64::NAN;
    for (p, &(lo, hi)) in panels.iter().enumerate() {
        if lo < b {
            continue;
        }
        let h = 0.5 * (hi - lo);
        // widths of a uniform run differ only by rounding of the cut positions
        if !((h - width).abs() <= 1e-11 * h) {
            width = h;
            for (bj, xi) in base.iter_mut().zip(x) {
                *bj = C64::from_polar(1.0, k * h * (1.0 + xi));
            }
            step = C64::from_polar(1.0, 2.0 * k * h);
            since_exact = usize::MAX;
        }
        // advance by one panel, re-anchoring every few panels and after gaps
        if since_exact < 16 && lo == prev_hi {
            start *= step;
            since_exact += 1;
        } else {
            start = C64::from_polar(1.0, k * (lo - b));
            since_exact = 0;
        }
        prev_hi = hi;
        for (j, bj) in base.iter().enumerate() {
            visit(p * PANEL_ORDER + j, start * bj);
        }
    }
}

fn panels_of(cuts: &[f64]) -> Vec<(f64, f64)> {
    cuts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Panels per block of the radial sweeps; keeps the accumulator in cache.
const SWEEP_BLOCK: usize = 128;

fn real_k(wave: &PiecewiseWave) -> Option<f64> {
    let q = wave.pieces[2].q;
    (q.im == 0.0 && q.re > 0.0).then_some(q.re)
}

/// [`inverse`] on the nodes of a radial grid.
pub fn inverse_on(
    profile: &EnergyProfile,
    grid: Arc<RadialGrid>,
    cfg: &PotentialConfig,
    tolerance: f64,
) -> Result<RadialSamples> {
    sweep(profile, grid, cfg, tolerance, false)
}

/// [`inverse_derivative`] on the nodes of a radial grid.
pub fn inverse_derivative_on(
    profile: &EnergyProfile,
    grid: Arc<RadialGrid>,
    cfg: &PotentialConfig,
    tolerance: f64,
) -> Result<RadialSamples> {
    sweep(profile, grid, cfg, tolerance, true)
}

fn sweep(
    profile: &EnergyProfile,
    grid: Arc<RadialGrid>,
    cfg: &PotentialConfig,
    tolerance: f64,
    derivative: bool,
) -> Result<RadialSamples> {
    let eval: fn(&PiecewiseWave, f64) -> C64 = if derivative { PiecewiseWave::derivative } else { PiecewiseWave::value };
    let tail = profile.tail_fraction(cfg);
    if tail > tolerance / 10.0 {
        log::warn!(
            "truncation: {:.3e} of the profile norm sits in the top 5% of k below E_max = {:.6e} (tolerance {:.1e})",
            tail,
            profile.grid.e_max(),
            tolerance
        );
    }
    let (x, _) = gauss_legendre(PANEL_ORDER);
    let nodes = grid.nodes();
    let terms: Vec<(PiecewiseWave, C64)> = waves(profile.kind, &profile.grid, cfg)?
        .into_iter()
        .zip(profile.values.iter().zip(&profile.grid.weights))
        .filter(|(_, (v, _))| **v != C64::new(0.0, 0.0))
        .map(|(w, (v, q))| (w, v * q))
        .collect();
    let all_panels = panels_of(&grid.cuts);
    let n_panels = all_panels.len();
    let blocks: Vec<std::ops::Range<usize>> =
        (0..n_panels).step_by(SWEEP_BLOCK).map(|p| p..(p + SWEEP_BLOCK).min(n_panels)).collect();
    let values: Vec<C64> = blocks
        .par_iter()
        .flat_map_iter(|panels| {
            let first = panels.start * PANEL_ORDER;
            let mut acc = vec![C64::new(0.0, 0.0); panels.len() * PANEL_ORDER];
            let block_nodes = &nodes[first..first + acc.len()];
            let n_inner = block_nodes.iter().take_while(|&&r| r < cfg.b).count();
            for (wave, c) in &terms {
                for (a, &r) in acc.iter_mut().zip(block_nodes).take(n_inner) {
                    *a += c * eval(wave, r);
                }
                if n_inner == acc.len() {
                    continue;
                }
                match real_k(wave) {
                    Some(k) => {
                        let outer = wave.pieces[2];
                        // u(r) = u0 cos + (u0'/k) sin, u'(r) = u0' cos - k u0 sin
                        let (cr, ci) = if derivative {
                            (c * outer.slope, -c * outer.value * k)
                        } else {
                            (c * outer.value, c * outer.slope / k)
                        };
                        outer_phases(&all_panels[panels.clone()], &x, cfg.b, k, |j, z| acc[j] += cr * z.re + ci * z.im);
                    }
                    None => {
                        for (a, &r) in acc.iter_mut().zip(block_nodes).skip(n_inner) {
                            *a += c * eval(wave, r);
                        }
                    }
                }
            }
            acc
        })
        .collect();
    Ok(RadialSamples { grid, values })
}

/// `<phi|E>`: `int conj(phi) chi(r; E) dr`, by adaptive quadrature.
pub fn ket_action<F: RadialFunction + ?Sized>(
    kind: TransformKind,
    energy: f64,
    phi: &F,
    cfg: &PotentialConfig,
    tol: Tolerance,
) -> Result<C64> {
    if !(energy > 0.0) {
        return Err(Error::InvalidArgument(format!("eigenkets need E > 0, got {energy}")));
    }
    let chi = kind.wave(energy, cfg)?;
    let k = (cfg.c2() * energy).sqrt();
    let mut total = C64::new(0.0, 0.0);
    for (lo, hi) in phi.pieces() {
        let mut cuts = uniform_cuts(lo, hi, (PI / k).min((hi - lo) / 4.0));
        cuts.extend([cfg.a, cfg.b].iter().filter(|&&x| x > lo && x < hi));
        cuts.sort_by(f64::total_cmp);
        total += integrate_partitioned(|r| phi.value(r).conj() * chi.value(r), &cuts, tol)?.value;
    }
    Ok(total)
}

/// `<E|phi>`, the conjugate of [`ket_action`].
pub fn bra_action<F: RadialFunction + ?Sized>(
    kind: TransformKind,
    energy: f64,
    phi: &F,
    cfg: &PotentialConfig,
    tol: Tolerance,
) -> Result<C64> {
    Ok(ket_action(kind, energy, phi, cfg, tol)?.conj())
}

/// `|<h phi|E> - E <phi|E>|` with `h phi` applied in closed form.
pub fn eigen_residual(
    kind: TransformKind,
    energy: f64,
    phi: &TestFunction,
    cfg: &PotentialConfig,
    tol: Tolerance,
) -> Result<f64> {
    let h_cfg = if kind == TransformKind::Zero { cfg.with_v0(0.0) } else { *cfg };
    let h_phi = phi.apply_h(&h_cfg, 1)?;
    let lhs = ket_action(kind, energy, &h_phi, cfg, tol)?;
    let rhs = energy * ket_action(kind, energy, phi, cfg, tol)?;
    Ok((lhs - rhs).norm())
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

    struct Exp;
    impl RadialFunction for Exp {
        fn value(&self, r: f64) -> C64 {
            C64::new((-r).exp(), 0.0)
        }
        fn pieces(&self) -> Vec<(f64, f64)> {
            vec![(0.0, 60.0)]
        }
    }

    #[test]
    fn sine_transform_of_exponential() {
        let c = cfg();
        let grid = Arc::new(EnergyGrid::log_spaced(1e-2, 50.0, 9).unwrap());
        let p = forward(TransformKind::Zero, &Exp, grid.clone(), &c).unwrap();
        for (e, v) in grid.energies.iter().zip(&p.values) {
            let k = (c.c2() * e).sqrt();
            let expect = crate::eigenfuncs::normalization(*e, &c).unwrap() * k / (1.0 + k * k);
            assert!((v - expect).norm() < 1e-12, "E={e}: {v} vs {expect}");
            let ket = ket_action(TransformKind::Zero, *e, &Exp, &c, tol()).unwrap();
            assert!((ket - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn energy_grids() {
        let c = cfg();
        let g = EnergyGrid::gauss_in_k(10.0, |_| 0.3, &[2.0], &c).unwrap();
        // int_0^100 sqrt(E) dE
        let s: f64 = g.energies.iter().zip(&g.weights).map(|(e, w)| w * e.sqrt()).sum();
        assert!((s - 2.0 / 3.0 * 1000.0).abs() < 1e-10);
        assert!(g.energies.windows(2).all(|w| w[1] > w[0]));
        let l = EnergyGrid::log_spaced(1e-3, 1e3, 200).unwrap();
        assert_eq!(l.len(), 200);
        assert_eq!(l.e_min(), 1e-3);
        assert_eq!(l.e_max(), 1e3);
        assert!(EnergyGrid::log_spaced(0.0, 1.0, 5).is_err());
        assert!(EnergyGrid::linear(1.0, 2.0, 1).is_err());
    }

    #[test]
    fn bra_and_ket_are_conjugate_and_match_forward() {
        let c = cfg();
        let phi = TestFunction::new(vec![Bump::new(1.5, 0.45, C64::new(1.0, -0.4))], 6.0, &c).unwrap();
        let grid = Arc::new(EnergyGrid::log_spaced(0.2, 30.0, 7).unwrap());
        for kind in [TransformKind::Plus, TransformKind::Minus, TransformKind::Zero] {
            let p = forward(kind, &phi, grid.clone(), &c).unwrap();
            for (e, v) in grid.energies.iter().zip(&p.values) {
                let ket = ket_action(kind, *e, &phi, &c, tol()).unwrap();
                let bra = bra_action(kind, *e, &phi, &c, tol()).unwrap();
                assert_eq!(bra, ket.conj());
                assert!((bra - v).norm() < 1e-12 * (1.0 + v.norm()), "{kind:?} E={e}: {bra} vs {v}");
            }
            let alpha = C64::new(0.3, 2.0);
            let e = 5.0;
            let k1 = ket_action(kind, e, &phi.scaled(alpha), &c, tol()).unwrap();
            let k0 = ket_action(kind, e, &phi, &c, tol()).unwrap();
            assert!((k1 - alpha.conj() * k0).norm() < 1e-13);
            let b1 = bra_action(kind, e, &phi.scaled(alpha), &c, tol()).unwrap();
            assert!((b1 - alpha * k0.conj()).norm() < 1e-13);
        }
    }

    #[test]
    fn s_relation_between_plus_and_minus() {
        let c = cfg();
        let g = TestFunction::new(
            vec![Bump::new(0.5, 0.4, C64::new(1.0, 0.0)), Bump::new(3.0, 0.8, C64::new(0.0, 1.0))],
            6.0,
            &c,
        )
        .unwrap();
        let grid = Arc::new(EnergyGrid::log_spaced(0.05, 40.0, 25).unwrap());
        let plus = forward(TransformKind::Plus, &g, grid.clone(), &c).unwrap();
        let minus = forward(TransformKind::Minus, &g, grid.clone(), &c).unwrap();
        for ((e, p), m) in grid.energies.iter().zip(&plus.values).zip(&minus.values) {
            let s = crate::coeffs::s_matrix(*e, &c).unwrap();
            assert!((m - s * p).norm() < 1e-8 * (1.0 + p.norm()));
        }
    }

    #[test]
    fn eigen_residuals() {
        let c = cfg();
        let shell = TestFunction::new(vec![Bump::new(1.5, 0.45, C64::new(1.0, 0.2))], 6.0, &c).unwrap();
        let plus = eigen_residual(TransformKind::Plus, 5.0, &shell, &c, tol()).unwrap();
        let minus = eigen_residual(TransformKind::Minus, 5.0, &shell, &c, tol()).unwrap();
        let scale = 5.0 * ket_action(TransformKind::Plus, 5.0, &shell, &c, tol()).unwrap().norm();
        assert!(plus < 1e-8 * scale + 1e-12, "{plus} vs {scale}");
        assert!((plus - minus).abs() < 1e-8 * scale + 1e-12);
        let free = PotentialConfig::new(1.0, 2.0, 0.0).unwrap();
        let outer = TestFunction::new(vec![Bump::new(3.0, 0.7, C64::new(1.0, 0.0))], 6.0, &free).unwrap();
        assert!(eigen_residual(TransformKind::Zero, 3.0, &outer, &free, tol()).unwrap() < 1e-10);
    }

    #[test]
    fn profile_basics() {
        let grid = Arc::new(EnergyGrid::linear(1.0, 2.0, 5).unwrap());
        let z = EnergyProfile::zeros(grid.clone(), TransformKind::Zero);
        assert_eq!(inverse(&z, &[0.5, 1.0, 3.0], &cfg(), 1e-6).unwrap(), vec![C64::new(0.0, 0.0); 3]);
        let p = EnergyProfile { grid: grid.clone(), values: vec![C64::new(1.0, 1.0); 5], kind: TransformKind::Plus };
        assert_eq!(p.value_at_node(1.26), Some((1.25, C64::new(1.0, 1.0))));
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("E,weight,value_re,value_im\n1,0.125,1,1\n"));
        let side = serde_json::to_value(p.sidecar(&cfg(), 1e-6)).unwrap();
        assert_eq!(side["kind"], "plus");
        assert_eq!(side["E_min"], 1.0);
        assert!(side.get("cfg-hash").is_some());
    }

    #[test]
    fn inverse_is_linear() {
        let c = cfg();
        let grid = Arc::new(EnergyGrid::linear(0.5, 8.0, 40).unwrap());
        let p = EnergyProfile { grid: grid.clone(), values: (0..40).map(|i| C64::new(i as f64, 1.0)).collect(), kind: TransformKind::Plus };
        let q = p.multiply(|e| C64::new(e.sin(), 0.5));
        let alpha = C64::new(0.2, -1.0);
        let mut sum = p.clone();
        for (s, v) in sum.values.iter_mut().zip(&q.values) {
            *s += alpha * v;
        }
        let r = [0.3, 1.4, 2.2, 7.0];
        let a = inverse(&p, &r, &c, 1.0).unwrap();
        let b = inverse(&q, &r, &c, 1.0).unwrap();
        let s = inverse(&sum, &r, &c, 1.0).unwrap();
        for i in 0..4 {
            assert!((s[i] - a[i] - alpha * b[i]).norm() < 1e-12 * s[i].norm().max(1.0));
        }
    }

    #[test]
    fn grid_sweeps_match_pointwise_sums() {
        let c = cfg();
        let f = TestFunction::new(vec![Bump::new(1.5, 0.4, C64::new(1.0, 0.5)), Bump::new(5.0, 2.0, C64::new(0.3, 0.0))], 9.0, &c).unwrap();
        let grid = Arc::new(RadialGrid::new(30.0, 0.37, &c, &[2.9, 17.0]).unwrap());
        let egrid = Arc::new(EnergyGrid::gauss_in_k(6.0, |_| 0.4, &[2.0], &c).unwrap());
        for kind in [TransformKind::Plus, TransformKind::Minus, TransformKind::Zero] {
            let p = forward(kind, &f, egrid.clone(), &c).unwrap();
            let swept = inverse_on(&p, grid.clone(), &c, 1.0).unwrap();
            let direct = inverse(&p, grid.nodes(), &c, 1.0).unwrap();
            let scale = swept.norm();
            for (a, b) in swept.values.iter().zip(&direct) {
                assert!((a - b).norm() < 1e-12 * scale);
            }
            let dswept = inverse_derivative_on(&p, grid.clone(), &c, 1.0).unwrap();
            let ddirect = inverse_derivative(&p, grid.nodes(), &c, 1.0).unwrap();
            let dscale = dswept.norm();
            for (a, b) in dswept.values.iter().zip(&ddirect) {
                assert!((a - b).norm() < 1e-12 * dscale);
            }
            let fs = forward_sampled(kind, &swept, egrid.clone(), &c).unwrap();
            let fw: Vec<(f64, C64)> = grid.nodes().iter().zip(grid.weights()).zip(&direct).map(|((&r, &w), &v)| (r, v * w)).collect();
            let fd = forward_nodes(kind, &fw, egrid.clone(), &c).unwrap();
            assert!(fs.max_difference(&fd).unwrap() < 1e-12 * fs.norm());
        }
    }

    #[test]
    fn round_trip_on_shell_bump() {
        let c = cfg();
        let f = TestFunction::new(vec![Bump::new(3.5, 1.2, C64::new(1.0, 0.5))], 6.0, &c).unwrap();
        let plan = TransformPlan::for_function(&f, &c, PlanOptions::round_trip()).unwrap();
        let norm = f.l2_norm(tol()).unwrap();
        for kind in [TransformKind::Plus, TransformKind::Zero] {
            let p = forward(kind, &f, plan.energy.clone(), &c).unwrap();
            assert!((p.norm() - norm).abs() < 1e-6 * norm, "{kind:?}: {} vs {norm}", p.norm());
            let back = inverse_on(&p, plan.radial.clone(), &c, 1e-6).unwrap();
            let err = back.distance_to(&f);
            assert!(err < 1e-6 * norm, "{kind:?}: {err}");
        }
    }
}
