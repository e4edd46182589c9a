//! Small-η analytics: outer trading speed, boundary layers, band shift and
//! the composite velocity profile.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{drift, CostKind, ModelParams};
use crate::ms::{third_derivative_at_band, theta_plus_at, theta_plus_deriv_at, Band, MsComponents};
use crate::special::{airy_log_derivative, find_root, integrate_ode_at, OdeOptions, RootBracket, AIRY_FIRST_MAX};

/// Everything the asymptotic formulas need about the pure linear-cost band at one x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandPoint {
    pub x: f64,
    /// Θ₀⁺(x).
    pub theta0: f64,
    /// dΘ₀⁺/dx.
    pub theta0_deriv: f64,
    /// ∂³V/∂θ³ at the boundary.
    pub v3: f64,
}

impl BandPoint {
    /// Solves the band at x to full precision.
    pub fn solve(comp: &MsComponents, gamma_lin: f64, x: f64) -> Result<Self> {
        let theta0 = theta_plus_at(comp, gamma_lin, x)?;
        let theta0_deriv = theta_plus_deriv_at(comp, gamma_lin, x, theta0)?;
        let band = Band {
            x_nodes: vec![x],
            theta_plus: vec![theta0],
            theta_minus: vec![f64::NAN],
            theta_plus_deriv: vec![theta0_deriv],
            theta_minus_deriv: vec![f64::NAN],
            valid: vec![true],
            gamma_lin,
        };
        let v3 = third_derivative_at_band(comp, &band, x)?;
        Ok(BandPoint { x, theta0, theta0_deriv, v3 })
    }
}

/// Outer (√η) trading speed in the '+' sector: −√(λ(θ²−Θ₀²) − μ(θ−Θ₀))/√η.
pub fn outer_velocity(params: &ModelParams, pt: &BandPoint, theta: f64, eta: f64) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(Error::Config(format!("eta must be > 0, got {eta}")));
    }
    let t0 = pt.theta0;
    let r = params.lambda * (theta * theta - t0 * t0) - drift(params, pt.x) * (theta - t0);
    if theta < t0 || r < 0.0 {
        return Err(Error::Regime(format!("theta {theta:e} is outside the outer trading region (radicand {r:e})")));
    }
    Ok(-(r / eta).sqrt())
}

/// Inner-layer constants for F² − B F_y = A²(y − y₀).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LayerConstants {
    pub a: f64,
    pub b: f64,
    pub z: f64,
    pub y0: f64,
}

impl LayerConstants {
    pub fn from_ab(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::Regime(format!("layer constant A = {a:e} must be positive")));
        }
        if !(b > 0.0) {
            return Err(Error::Degenerate(format!("layer constant B = {b:e} vanishes (flat band)")));
        }
        let z = (a / b).powf(2.0 / 3.0);
        Ok(LayerConstants { a, b, z, y0: -AIRY_FIRST_MAX / z })
    }

    /// F_y(0) = A²y₀/B.
    pub fn slope_at_zero(&self) -> f64 {
        self.a * self.a * self.y0 / self.b
    }
}

/// A = 2√(2λΘ₀ − μ), B = 2σ²Θ₀'².
pub fn layer_constants(params: &ModelParams, pt: &BandPoint) -> Result<LayerConstants> {
    let edge = 2.0 * params.lambda * pt.theta0 - drift(params, pt.x);
    if !(edge > 0.0) {
        return Err(Error::Regime(format!("2λΘ₀ − μ = {edge:e} is not positive at x = {}", pt.x)));
    }
    let b = 2.0 * params.sigma * params.sigma * pt.theta0_deriv * pt.theta0_deriv;
    LayerConstants::from_ab(2.0 * edge.sqrt(), b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LayerKind {
    AiryQuadratic,
    AbelThreeHalves,
}

/// Sampled inner profile. For the Abel kind `constants` holds (A′, B′, 1/y*, y₀)
/// with y* = B′^{3/5}A′^{−4/5} the natural layer scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerProfile {
    pub kind: LayerKind,
    pub y: Vec<f64>,
    pub f: Vec<f64>,
    pub f_y: Vec<f64>,
    pub slope_at_zero: f64,
    pub constants: LayerConstants,
}

fn sample_points(y_max: f64, n: usize) -> Result<Vec<f64>> {
    if !(y_max > 0.0) || n < 2 {
        return Err(Error::Config(format!("layer sampling needs y_max > 0 and n >= 2 (got {y_max}, {n})")));
    }
    Ok((0..n).map(|i| y_max * i as f64 / (n - 1) as f64).collect())
}

/// F(y) = −Bz·Ai'(u)/Ai(u), u = z(y − y₀).
pub fn airy_layer_value(c: &LayerConstants, y: f64) -> (f64, f64) {
    let u = c.z * (y - c.y0);
    let r = airy_log_derivative(u);
    (-c.b * c.z * r, -c.b * c.z * c.z * (u - r * r))
}

pub fn layer_profile_airy(c: &LayerConstants, y_max: f64, n: usize) -> Result<LayerProfile> {
    let y = sample_points(y_max, n)?;
    let (f, f_y): (Vec<f64>, Vec<f64>) = y.iter().map(|&v| airy_layer_value(c, v)).unzip();
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("Airy profile left the representable range".into()));
    }
    let mut f = f;
    f[0] = 0.0;
    Ok(LayerProfile { kind: LayerKind::AiryQuadratic, y, f, f_y, slope_at_zero: c.slope_at_zero(), constants: *c })
}

/// max |F^p − B F_y − A²(y − y₀)| / (A²(1 + y)) with p = 2 (Airy) or 3 (Abel).
pub fn layer_ode_residual(profile: &LayerProfile) -> f64 {
    let c = &profile.constants;
    let p = match profile.kind {
        LayerKind::AiryQuadratic => 2,
        LayerKind::AbelThreeHalves => 3,
    };
    profile
        .y
        .iter()
        .zip(profile.f.iter().zip(&profile.f_y))
        .map(|(&y, (&f, &fy))| (f.powi(p) - c.b * fy - c.a * c.a * (y - c.y0)).abs() / (c.a * c.a * (1.0 + y)))
        .fold(0.0, f64::max)
}

/// Θ_η = Θ₀ − (F_y(0)/V_θθθ)·η^{1/3}.
pub fn band_shift(params: &ModelParams, pt: &BandPoint, eta: f64) -> Result<f64> {
    if !(eta >= 0.0) {
        return Err(Error::Config(format!("eta must be >= 0, got {eta}")));
    }
    if !(pt.v3 > 0.0) {
        return Err(Error::Regime(format!("third derivative {:e} at the band is not positive", pt.v3)));
    }
    let c = layer_constants(params, pt)?;
    Ok(pt.theta0 - c.slope_at_zero() / pt.v3 * eta.cbrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    #[serde(rename = "NT")]
    NoTrade,
    #[serde(rename = "LAYER")]
    Layer,
    #[serde(rename = "SQRT")]
    Sqrt,
    #[serde(rename = "LINEAR")]
    Linear,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::NoTrade => "NT",
            Regime::Layer => "LAYER",
            Regime::Sqrt => "SQRT",
            Regime::Linear => "LINEAR",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VelocityProfile {
    pub theta: Vec<f64>,
    pub v: Vec<f64>,
    pub regime: Vec<Regime>,
    pub theta_eta: f64,
    /// θ − Θ_η at which the inner solution hands over to the composite.
    pub seam: f64,
    /// |Θ₀ − Θ_η| / band width.
    pub gauge: f64,
    /// Set when the gauge exceeds 0.2 and the perturbative picture is doubtful.
    pub warning: bool,
}

/// Seam position in layer units y₀.
pub const SEAM_LAYERS: f64 = 30.0;

/// Additive composite of the Airy layer and the outer solution in the '+' sector.
pub fn composite_velocity(
    params: &ModelParams,
    pt: &BandPoint,
    band_width: f64,
    eta: f64,
    theta_grid: &[f64],
) -> Result<VelocityProfile> {
    if !(eta > 0.0) {
        return Err(Error::Config(format!("eta must be > 0, got {eta}")));
    }
    let c = layer_constants(params, pt)?;
    let theta_eta = band_shift(params, pt, eta)?;
    let e3 = eta.cbrt();
    let seam = SEAM_LAYERS * c.y0 * e3;
    let edge = 2.0 * params.lambda * pt.theta0 - drift(params, pt.x);
    let crossover = edge / params.lambda;
    let gauge = (pt.theta0 - theta_eta).abs() / band_width;
    let mut v = Vec::with_capacity(theta_grid.len());
    let mut regime = Vec::with_capacity(theta_grid.len());
    for &t in theta_grid {
        let d = t - theta_eta;
        if d <= 0.0 {
            v.push(0.0);
            regime.push(Regime::NoTrade);
            continue;
        }
        let inner = -e3 * e3 * airy_layer_value(&c, d / e3).0 / (2.0 * eta);
        if d <= seam {
            v.push(inner);
            regime.push(Regime::Layer);
            continue;
        }
        let common = -c.a * d.sqrt() / (2.0 * eta.sqrt());
        let outer = outer_velocity(params, pt, t.max(pt.theta0), eta)?;
        v.push(inner + outer - common);
        regime.push(if t - pt.theta0 < crossover { Regime::Sqrt } else { Regime::Linear });
    }
    Ok(VelocityProfile { theta: theta_grid.to_vec(), v, regime, theta_eta, seam, gauge, warning: gauge > 0.2 })
}

/// Solves G³ − B′G_y = A′²(y − y₀) with G(0) = 0 and G ~ (A′²y)^{1/3}.
///
/// The forward problem is unstable (∂G_y/∂G = 3G²/B′ > 0), so the profile is
/// integrated backward from the large-y asymptote and y₀ is fixed by G(0) = 0.
pub fn abel_layer_solve(aprime: f64, bprime: f64, y_max: f64, n: usize) -> Result<LayerProfile> {
    if !(aprime > 0.0 && bprime > 0.0) {
        return Err(Error::Config(format!("A' and B' must be positive (got {aprime}, {bprime})")));
    }
    let ys = sample_points(y_max, n)?;
    let a2 = aprime * aprime;
    let scale = bprime.powf(0.6) * aprime.powf(-0.8);
    if y_max < 20.0 * scale {
        return Err(Error::Config(format!("y_max = {y_max:e} must exceed 20 layer scales ({:e})", 20.0 * scale)));
    }
    let rev: Vec<f64> = ys.iter().rev().copied().collect();
    let shoot = |y0: f64, pts: &[f64]| -> Result<Vec<f64>> {
        let n0 = (a2 * (y_max - y0)).cbrt();
        let n0_y = a2 / (3.0 * n0 * n0);
        let g_start = n0 + bprime * n0_y / (3.0 * n0 * n0);
        let rhs = |y: f64, g: &[f64], d: &mut [f64]| d[0] = (g[0].powi(3) - a2 * (y - y0)) / bprime;
        let opts = OdeOptions { rtol: 1e-13, atol: 1e-14 * n0, ..OdeOptions::with_tol(1e-13) };
        let tr = integrate_ode_at(rhs, y_max, &[g_start], pts, opts)?;
        Ok(tr.y.iter().map(|v| v[0]).collect())
    };
    let at_zero = |y0: f64| -> f64 { shoot(y0, &[0.0]).map(|v| v[0]).unwrap_or(f64::NAN) };
    let (lo, hi) = (1e-2 * scale, 10.0 * scale);
    let (flo, fhi) = (at_zero(lo), at_zero(hi));
    if !(flo > 0.0 && fhi < 0.0) {
        return Err(Error::Bracket { lo, hi, flo, fhi });
    }
    let y0 = find_root(at_zero, RootBracket::new(lo, hi, 1e-15 * scale)?)?;
    let mut g = shoot(y0, &rev)?;
    g.reverse();
    g[0] = 0.0;
    let g_y: Vec<f64> = ys.iter().zip(&g).map(|(&y, &v)| (v.powi(3) - a2 * (y - y0)) / bprime).collect();
    let constants = LayerConstants { a: aprime, b: bprime, z: 1.0 / scale, y0 };
    Ok(LayerProfile { kind: LayerKind::AbelThreeHalves, y: ys, slope_at_zero: g_y[0], f: g, f_y: g_y, constants })
}

/// Exponents of the inner scaling f = c^α F(θ/c^β) and of the value expansion, c = η or ζ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostScaling {
    pub alpha: f64,
    pub beta: f64,
    pub expansion_power: f64,
}

pub fn power_cost_scaling(kind: CostKind) -> CostScaling {
    match kind {
        CostKind::Quadratic => CostScaling { alpha: 2.0 / 3.0, beta: 1.0 / 3.0, expansion_power: 0.5 },
        CostKind::ThreeHalves => CostScaling { alpha: 0.8, beta: 0.4, expansion_power: 2.0 / 3.0 },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// γφ against (Γ/σ√T)^{4/3}(ΩT)^{−5/6} with T = 1 day; "≪" means `margin_decades` decades.
pub fn validity_check(params: &ModelParams, gamma_lin: f64, gamma_coeff: f64, phi: f64, margin_decades: f64) -> ValidityCheck {
    let t: f64 = 1.0;
    let lhs = gamma_coeff * phi;
    let rhs = (gamma_lin / (params.sigma * t.sqrt())).powf(4.0 / 3.0) * (params.omega * t).powf(-5.0 / 6.0);
    ValidityCheck { lhs, rhs, ok: lhs <= rhs * 10f64.powf(-margin_decades) }
}
