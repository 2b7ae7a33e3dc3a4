use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shellscatter::transforms::EnergyGrid;
use shellscatter::PotentialConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Lin,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grids {
    pub e_min: f64,
    pub e_max: f64,
    pub n_e: usize,
    pub spacing: Spacing,
    pub r_max: f64,
    pub n_r: usize,
}

impl Default for Grids {
    fn default() -> Self {
        Self { e_min: 1e-3, e_max: 1e3, n_e: 200, spacing: Spacing::Log, r_max: 6.0, n_r: 601 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub closed_form: f64,
    pub quadrature: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { closed_form: 1e-12, quadrature: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub potential: PotentialConfig,
    pub grids: Grids,
    pub tolerances: Tolerances,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            potential: PotentialConfig::default(),
            grids: Grids::default(),
            tolerances: Tolerances::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub v0: Option<f64>,
    pub e_min: Option<f64>,
    pub e_max: Option<f64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, String> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?;
                serde_json::from_str(&text).map_err(|e| format!("bad config {}: {e}", p.display()))?
            }
            None => RunConfig::default(),
        };
        let o = overrides;
        if let Some(x) = o.a {
            cfg.potential.a = x;
        }
        if let Some(x) = o.b {
            cfg.potential.b = x;
        }
        if let Some(x) = o.v0 {
            cfg.potential.v0 = x;
        }
        if let Some(x) = o.e_min {
            cfg.grids.e_min = x;
        }
        if let Some(x) = o.e_max {
            cfg.grids.e_max = x;
        }
        if let Some(x) = &o.out {
            cfg.output_dir = x.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.potential.validate().map_err(|e| e.to_string())?;
        let g = &self.grids;
        if g.n_e < 2 || g.n_r < 2 {
            return Err(format!("grid sizes must be at least 2 (n_e={}, n_r={})", g.n_e, g.n_r));
        }
        if !(g.e_min > 0.0 && g.e_max > g.e_min && g.e_max.is_finite()) {
            return Err(format!("need 0 < e_min < e_max (got {}, {})", g.e_min, g.e_max));
        }
        if !(g.r_max > 0.0 && g.r_max.is_finite()) {
            return Err(format!("r_max must be positive (got {})", g.r_max));
        }
        let t = &self.tolerances;
        if !(t.closed_form > 0.0 && t.quadrature > 0.0) {
            return Err("tolerances must be positive".into());
        }
        Ok(())
    }

    pub fn energies(&self) -> shellscatter::Result<Vec<f64>> {
        let g = &self.grids;
        let grid = match g.spacing {
            Spacing::Lin => EnergyGrid::linear(g.e_min, g.e_max, g.n_e)?,
            Spacing::Log => EnergyGrid::log_spaced(g.e_min, g.e_max, g.n_e)?,
        };
        Ok(grid.energies)
    }

    /// `n_r` equally spaced radii on `[0, r_max]`.
    pub fn radii(&self) -> Vec<f64> {
        let n = self.grids.n_r;
        (0..n).map(|i| self.grids.r_max * i as f64 / (n - 1) as f64).collect()
    }
}
