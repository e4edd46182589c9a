//! Interchangeable layer models and band solvers, looked up by name.

use crate::asymptotics::{abel_layer_solve, band_shift, layer_profile_airy, BandPoint, LayerConstants, LayerProfile};
use crate::error::{Error, Result};
use crate::hjb::{solve_hjb, SolverConfig};
use crate::model::{CostKind, CostParams, ModelParams};
use crate::ms::{find_band_zero, greens_particular, solve_homogeneous, Band, MsComponents};

/// Inner boundary-layer profile for one kind of nonlinear cost.
pub trait LayerModel: Send + Sync {
    fn name(&self) -> &'static str;
    fn kind(&self) -> CostKind;
    /// Profile on [0, y_max] from the two layer constants.
    fn profile(&self, a: f64, b: f64, y_max: f64, n: usize) -> Result<LayerProfile>;
    /// Exponents (α, β) of the inner scaling f = c^α F(θ/c^β).
    fn scaling(&self) -> (f64, f64);
}

/// F² − B F_y = A²(y − y₀), solved by the Airy function.
pub struct AiryQuadratic;

/// G³ − B′G_y = A′²(y − y₀), integrated numerically.
pub struct AbelThreeHalves;

impl LayerModel for AiryQuadratic {
    fn name(&self) -> &'static str {
        "airy"
    }

    fn kind(&self) -> CostKind {
        CostKind::Quadratic
    }

    fn profile(&self, a: f64, b: f64, y_max: f64, n: usize) -> Result<LayerProfile> {
        layer_profile_airy(&LayerConstants::from_ab(a, b)?, y_max, n)
    }

    fn scaling(&self) -> (f64, f64) {
        (2.0 / 3.0, 1.0 / 3.0)
    }
}

impl LayerModel for AbelThreeHalves {
    fn name(&self) -> &'static str {
        "abel"
    }

    fn kind(&self) -> CostKind {
        CostKind::ThreeHalves
    }

    fn profile(&self, a: f64, b: f64, y_max: f64, n: usize) -> Result<LayerProfile> {
        if b == 0.0 {
            return Err(Error::Degenerate("layer constant B' vanishes (flat band)".into()));
        }
        abel_layer_solve(a, b, y_max, n)
    }

    fn scaling(&self) -> (f64, f64) {
        (0.8, 0.4)
    }
}

static LAYER_MODELS: [&dyn LayerModel; 2] = [&AiryQuadratic, &AbelThreeHalves];

pub fn layer_models() -> &'static [&'static dyn LayerModel] {
    &LAYER_MODELS
}

pub fn layer_model(kind: CostKind) -> &'static dyn LayerModel {
    *LAYER_MODELS.iter().find(|m| m.kind() == kind).expect("every cost kind has a layer model")
}

/// Everything a band solver may need.
#[derive(Debug, Clone)]
pub struct BandRequest {
    pub params: ModelParams,
    pub costs: CostParams,
    pub x: Vec<f64>,
    pub theta_range: (f64, f64),
    pub ntheta: usize,
    pub solver: SolverConfig,
}

impl BandRequest {
    fn components(&self) -> Result<MsComponents> {
        zero_eta_components(&self.params, &self.x)
    }
}

/// Zero-eta components on a domain with room beyond the outermost x-node.
pub fn zero_eta_components(params: &ModelParams, x: &[f64]) -> Result<MsComponents> {
    let reach = x.iter().fold(params.stationary_std(), |m, v| m.max(v.abs())) * 1.35;
    greens_particular(&solve_homogeneous(params, (-reach, reach))?)
}

/// A way of computing the no-trade band on the requested x-nodes.
pub trait BandMethod: Send + Sync {
    fn name(&self) -> &'static str;
    fn band(&self, req: &BandRequest) -> Result<Band>;
}

/// Linear cost only: the exact free-boundary solution.
pub struct ZeroEta;

/// Numerical HJB solve with both costs.
pub struct Numeric;

/// Zero-eta band moved inward by the predicted η^{1/3} shift.
pub struct Asymptotic;

impl BandMethod for ZeroEta {
    fn name(&self) -> &'static str {
        "ms"
    }

    fn band(&self, req: &BandRequest) -> Result<Band> {
        find_band_zero(&req.components()?, req.costs.gamma_lin, &req.x)
    }
}

impl BandMethod for Numeric {
    fn name(&self) -> &'static str {
        "hjb"
    }

    fn band(&self, req: &BandRequest) -> Result<Band> {
        Ok(solve_hjb(&req.params, &req.costs, &req.x, req.theta_range, req.ntheta, &req.solver)?.band)
    }
}

impl BandMethod for Asymptotic {
    fn name(&self) -> &'static str {
        "asymptotic"
    }

    fn band(&self, req: &BandRequest) -> Result<Band> {
        if req.costs.kind != CostKind::Quadratic {
            return Err(Error::Config("the asymptotic band shift is available for the quadratic cost only".into()));
        }
        let comp = req.components()?;
        let g = req.costs.gamma_lin;
        let mut band = find_band_zero(&comp, g, &req.x)?;
        let eta = req.costs.eta;
        for i in 0..band.len() {
            if !band.valid[i] {
                continue;
            }
            // the lower edge at x is the upper edge at −x reflected
            let shifted = |x: f64| -> Result<f64> { band_shift(&req.params, &BandPoint::solve(&comp, g, x)?, eta) };
            match (shifted(req.x[i]), shifted(-req.x[i])) {
                (Ok(tp), Ok(tm)) => {
                    band.theta_plus[i] = tp;
                    band.theta_minus[i] = tm;
                }
                _ => band.valid[i] = false,
            }
        }
        if band.valid.iter().all(|v| !v) {
            return Err(Error::Regime("predicted band shift unavailable at every x-node".into()));
        }
        Ok(band)
    }
}

static BAND_METHODS: [&dyn BandMethod; 3] = [&ZeroEta, &Numeric, &Asymptotic];

pub fn band_methods() -> &'static [&'static dyn BandMethod] {
    &BAND_METHODS
}

pub fn band_method(name: &str) -> Result<&'static dyn BandMethod> {
    BAND_METHODS.iter().copied().find(|m| m.name() == name).ok_or_else(|| {
        let known: Vec<&str> = BAND_METHODS.iter().map(|m| m.name()).collect();
        Error::Config(format!("unknown band method {name:?}; known: {}", known.join(", ")))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::linspace;

    fn request(eta: f64) -> BandRequest {
        let p = ModelParams::desk();
        BandRequest {
            params: p,
            costs: CostParams::quadratic(1e-4, eta).unwrap(),
            x: linspace(-0.2, 0.2, 9),
            theta_range: (-0.06, 0.06),
            ntheta: 201,
            solver: SolverConfig::default(),
        }
    }

    #[test]
    fn lookup() {
        assert_eq!(band_method("hjb").unwrap().name(), "hjb");
        assert!(matches!(band_method("nope"), Err(Error::Config(_))));
        assert_eq!(layer_model(CostKind::ThreeHalves).name(), "abel");
        assert_eq!(layer_models().len(), 2);
        assert_eq!(band_methods().len(), 3);
    }

    #[test]
    fn asymptotic_band_sits_inside_zero_eta_band() {
        let req = request(1e-6);
        let zero = band_method("ms").unwrap().band(&req).unwrap();
        let asym = band_method("asymptotic").unwrap().band(&req).unwrap();
        for i in 0..zero.len() {
            assert!(asym.theta_plus[i] < zero.theta_plus[i] && asym.theta_minus[i] < zero.theta_minus[i]);
        }
        // reflection symmetry of the desk problem
        let n = zero.len();
        for i in 0..n {
            assert!((asym.theta_plus[i] - asym.theta_minus[n - 1 - i]).abs() < 1e-9);
        }
    }

    #[test]
    fn methods_agree_at_small_eta() {
        let req = request(1e-7);
        let asym = band_method("asymptotic").unwrap().band(&req).unwrap();
        let num = band_method("hjb").unwrap().band(&req).unwrap();
        let w = crate::ms::half_width_estimate(&req.params, 1e-4);
        for i in 0..asym.len() {
            assert!((asym.theta_plus[i] - num.theta_plus[i]).abs() < 0.02 * w, "x {} {} {}", req.x[i], asym.theta_plus[i], num.theta_plus[i]);
        }
    }

    #[test]
    fn layer_models_solve_their_equations() {
        for m in layer_models() {
            let prof = m.profile(1.0, 1.0, 60.0, 3001).unwrap();
            assert_eq!(prof.f[0], 0.0);
            assert!(crate::asymptotics::layer_ode_residual(&prof) < 1e-8, "{}", m.name());
        }
        assert!(matches!(AbelThreeHalves.profile(1.0, 0.0, 60.0, 10), Err(Error::Degenerate(_))));
        assert!(matches!(AiryQuadratic.profile(1.0, 0.0, 60.0, 10), Err(Error::Degenerate(_))));
    }
}
