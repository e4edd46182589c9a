//! JSON run configuration. Unknown keys are rejected in every section.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::experiments::ValidityParams;
use crate::hjb::SolverConfig;
use crate::model::{linspace, markowitz, CostParams, ModelParams};
use crate::registry::band_method;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    #[serde(default = "default_nx")]
    pub nx: usize,
    pub theta_min: Option<f64>,
    pub theta_max: Option<f64>,
    #[serde(default = "default_ntheta")]
    pub ntheta: usize,
}

fn default_nx() -> usize {
    41
}

fn default_ntheta() -> usize {
    801
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { x_min: None, x_max: None, nx: default_nx(), theta_min: None, theta_max: None, ntheta: default_ntheta() }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandSection {
    /// One of the registered band methods.
    #[serde(default = "default_method")]
    pub method: String,
}

fn default_method() -> String {
    "ms".into()
}

impl Default for BandSection {
    fn default() -> Self {
        BandSection { method: default_method() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub etas: Vec<f64>,
    #[serde(default)]
    pub gammas: Vec<f64>,
    /// Run the regime map at cost.eta and 8·cost.eta.
    #[serde(default)]
    pub regime: bool,
    #[serde(default)]
    pub regime_x: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValiditySection {
    pub gamma_coeff: f64,
    pub phi: f64,
    pub daily_volume: f64,
    #[serde(default = "one")]
    pub horizon: f64,
    /// Decades that "much smaller than" stands for.
    #[serde(default = "one")]
    pub margin_decades: f64,
}

fn one() -> f64 {
    1.0
}

impl ValiditySection {
    pub fn params(&self) -> ValidityParams {
        ValidityParams { gamma_coeff: self.gamma_coeff, phi: self.phi, daily_volume: self.daily_volume, horizon: self.horizon }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSection {
    /// Signal value whose band point supplies A and B (quadratic cost).
    #[serde(default)]
    pub x: f64,
    /// Explicit layer constants; required for the 3/2 cost.
    pub a: Option<f64>,
    pub b: Option<f64>,
    /// Extent in units of y₀ (Airy) or of the natural layer scale (Abel).
    #[serde(default = "default_extent")]
    pub extent: f64,
    #[serde(default = "default_samples")]
    pub n: usize,
}

fn default_extent() -> f64 {
    100.0
}

fn default_samples() -> usize {
    4001
}

impl Default for LayerSection {
    fn default() -> Self {
        LayerSection { x: 0.0, a: None, b: None, extent: default_extent(), n: default_samples() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSection {
    /// Relative perturbation applied to the layer profile before its residual
    /// is measured; nonzero values exercise the failure path.
    #[serde(default)]
    pub perturb_layer: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    pub cost: CostParams,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub band: BandSection,
    #[serde(default)]
    pub sweep: SweepSection,
    pub validity: Option<ValiditySection>,
    #[serde(default)]
    pub layer: LayerSection,
    #[serde(default)]
    pub check: CheckSection,
    /// Output directory; the command line takes precedence.
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.cost.validate()?;
        self.solver.validate()?;
        band_method(&self.band.method)?;
        let g = &self.grid;
        if g.nx < 5 || g.ntheta < 5 {
            return Err(Error::Config(format!("grid.nx and grid.ntheta must be >= 5 (got {}, {})", g.nx, g.ntheta)));
        }
        let (a, b) = self.x_range()?;
        if !(a < b) {
            return Err(Error::Config(format!("grid.x_min {a} must be below grid.x_max {b}")));
        }
        let (lo, hi) = self.theta_range()?;
        if !(lo < 0.0 && hi > 0.0) {
            return Err(Error::Config(format!("theta range [{lo}, {hi}] must contain 0")));
        }
        if self.sweep.etas.iter().chain(&self.sweep.gammas).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config("sweep values must be positive".into()));
        }
        if let Some(v) = &self.validity {
            v.params().validate()?;
            if !(v.margin_decades >= 0.0) {
                return Err(Error::Config("validity.margin_decades must be >= 0".into()));
            }
        }
        let l = &self.layer;
        if l.a.is_some_and(|v| !(v > 0.0)) || l.b.is_some_and(|v| !(v >= 0.0)) {
            return Err(Error::Config("layer.a must be > 0 and layer.b >= 0".into()));
        }
        if !(l.extent > 0.0) || l.n < 3 {
            return Err(Error::Config("layer.extent must be > 0 and layer.n >= 3".into()));
        }
        if !self.check.perturb_layer.is_finite() {
            return Err(Error::Config("check.perturb_layer must be finite".into()));
        }
        Ok(())
    }

    /// x-range, by default ±6 stationary deviations of the signal.
    pub fn x_range(&self) -> Result<(f64, f64)> {
        let (da, db) = self.model.default_x_domain(6.0);
        let a = self.grid.x_min.unwrap_or(da);
        let b = self.grid.x_max.unwrap_or(db);
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::Config("grid.x_min and grid.x_max are required when model.omega = 0".into()));
        }
        Ok((a, b))
    }

    pub fn x_nodes(&self) -> Result<Vec<f64>> {
        let (a, b) = self.x_range()?;
        Ok(linspace(a, b, self.grid.nx))
    }

    /// θ-range, by default ±4 times the largest Markowitz position over the x-range.
    pub fn theta_range(&self) -> Result<(f64, f64)> {
        let (a, b) = self.x_range()?;
        let m = 4.0 * markowitz(&self.model, a).abs().max(markowitz(&self.model, b).abs());
        Ok((self.grid.theta_min.unwrap_or(-m), self.grid.theta_max.unwrap_or(m)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DESK: &str = r#"{
        "model": {"sigma": 0.02, "omega": 0.1, "lambda": 1.0, "rho": 0.001},
        "cost": {"gamma_lin": 1e-4, "eta": 1e-5}
    }"#;

    #[test]
    fn defaults_filled_in() {
        let c = RunConfig::parse(DESK).unwrap();
        assert_eq!(c.grid.nx, 41);
        assert_eq!(c.band.method, "ms");
        let (a, b) = c.x_range().unwrap();
        assert!((b - 6.0 * 0.02 / 0.2f64.sqrt()).abs() < 1e-12 && a == -b);
        let (lo, hi) = c.theta_range().unwrap();
        assert!((hi - 4.0 * 0.1 * b / 2.0).abs() < 1e-12 && lo == -hi);
        assert_eq!(c.solver, SolverConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = DESK.replace("\"rho\": 0.001", "\"rho\": 0.001, \"kappa\": 1");
        assert!(matches!(RunConfig::parse(&bad), Err(Error::Json(_))));
        let bad = DESK.replace("}\n    }", "},\n \"grid\": {\"nxx\": 3}\n    }");
        assert!(RunConfig::parse(&bad).is_err());
        let bad = DESK.replace("\"eta\": 1e-5", "\"eta\": 1e-5, \"gamma\": 2");
        assert!(RunConfig::parse(&bad).is_err());
    }

    #[test]
    fn invariants_revalidated() {
        let e = RunConfig::parse(&DESK.replace("\"gamma_lin\": 1e-4", "\"gamma_lin\": 0")).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = RunConfig::parse(&DESK.replace("\"eta\": 1e-5", "\"eta\": 1e-5, \"kind\": \"three_halves\"")).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let with = |extra: &str| DESK.replacen('{', &format!("{{ {extra},"), 1);
        assert!(RunConfig::parse(&with(r#""band": {"method": "magic"}"#)).is_err());
        assert!(RunConfig::parse(&with(r#""grid": {"nx": 3}"#)).is_err());
        assert!(RunConfig::parse(&with(r#""grid": {"theta_min": 0.01}"#)).is_err());
        assert!(RunConfig::parse(&with(r#""sweep": {"etas": [1e-6, -1]}"#)).is_err());
        assert!(RunConfig::parse(&with(r#""validity": {"gamma_coeff": 1, "phi": 0, "daily_volume": 1}"#)).is_err());
        assert!(RunConfig::parse(&with(r#""solver": {"pseudo_time_step": 2.0}"#)).is_err());
        let flat = DESK.replace("\"omega\": 0.1", "\"omega\": 0");
        assert!(RunConfig::parse(&flat).is_err());
        assert!(RunConfig::load(Path::new("/nonexistent/config.json")).unwrap_err().exit_code() == 2);
    }
}
