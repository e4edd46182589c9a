//! Scaling sweeps, regime classification and the validity calculator.

use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{band_shift, composite_velocity, layer_constants, BandPoint, Regime};
use crate::error::{Error, Result};
use crate::hjb::{build_mesh, solve_on_mesh, velocity_slice, SolverConfig, ValueGrid};
use crate::model::{drift, CostParams, ModelParams};
use crate::ms::{find_band_zero, MsComponents};
use crate::registry::zero_eta_components;

/// Slopes with a standard error above this are flagged.
pub const LOW_CONFIDENCE_STDERR: f64 = 0.05;

/// Least-squares line through (ln x, ln y).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub residuals: Vec<f64>,
    pub low_confidence: bool,
}

pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<LogLogFit> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::Config(format!("log-log fit needs at least 3 paired points, got {}", x.len().min(y.len()))));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::Domain("log-log fit needs positive data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("log-log fit needs distinct abscissas".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = lx.iter().zip(&ly).map(|(a, b)| b - (intercept + slope * a)).collect();
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    let stderr = (sse / (n - 2.0) / sxx).sqrt();
    Ok(LogLogFit { slope, intercept, stderr, residuals, low_confidence: stderr > LOW_CONFIDENCE_STDERR })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub parameter: f64,
    pub measured: f64,
    pub predicted: f64,
    pub included: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub name: String,
    pub points: Vec<SweepPoint>,
    pub fit: LogLogFit,
    pub target_slope: f64,
    /// Mean measured/predicted over included points.
    pub prefactor_ratio: f64,
    /// Largest relative deviation of measured/predicted from its mean.
    pub prefactor_spread: f64,
    pub warnings: Vec<String>,
}

impl SweepResult {
    pub fn slope_within(&self, lo: f64, hi: f64) -> bool {
        self.fit.slope >= lo && self.fit.slope <= hi
    }
}

fn check_sweep_list(name: &str, values: &[f64]) -> Result<()> {
    if values.len() < 4 {
        return Err(Error::Config(format!("{name} sweep needs at least 4 values, got {}", values.len())));
    }
    if values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Config(format!("{name} sweep values must be positive")));
    }
    let (lo, hi) = values.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    if hi / lo < 100.0 * (1.0 - 1e-9) {
        return Err(Error::Config(format!("{name} sweep must span at least two decades")));
    }
    Ok(())
}

/// Grid description shared by the sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub x: Vec<f64>,
    pub theta_range: (f64, f64),
    pub ntheta: usize,
}

fn nearest(xs: &[f64], x: f64) -> usize {
    (0..xs.len()).min_by(|&a, &b| (xs[a] - x).abs().total_cmp(&(xs[b] - x).abs())).unwrap_or(0)
}

/// Gauge above which an η is excluded: predicted shift over band width.
pub const SHIFT_GAUGE_LIMIT: f64 = 0.2;

/// Inward shift of the upper edge at x = 0 against η. The reference is the
/// oracle's own band at `cfg.eta_floor` on the same mesh.
pub fn eta_shift_sweep(
    params: &ModelParams,
    gamma_lin: f64,
    etas: &[f64],
    grid: &SweepGrid,
    cfg: &SolverConfig,
) -> Result<SweepResult> {
    check_sweep_list("eta", etas)?;
    let comp = zero_eta_components(params, &grid.x)?;
    let i0 = nearest(&grid.x, 0.0);
    let x0 = grid.x[i0];
    let pt = BandPoint::solve(&comp, gamma_lin, x0)?;
    let band0 = find_band_zero(&comp, gamma_lin, &[x0])?;
    let width = band0.width(0);
    let mesh = build_mesh(params, gamma_lin, &grid.x, grid.theta_range, grid.ntheta, cfg)?;
    let mut all = vec![cfg.eta_floor];
    all.extend_from_slice(etas);
    let solved: Vec<Result<ValueGrid>> = all
        .par_iter()
        .map(|&eta| solve_on_mesh(params, &CostParams::quadratic(gamma_lin, eta)?, &mesh, cfg))
        .collect();
    let mut solved = solved.into_iter();
    let base = solved.next().expect("floor solve")?;
    if !base.band.valid[i0] {
        return Err(Error::Regime("oracle band not found at x = 0 at the eta floor".into()));
    }
    let t_floor = base.band.theta_plus[i0];
    let mut warnings = Vec::new();
    let mut points = Vec::new();
    for (&eta, vg) in etas.iter().zip(solved) {
        let vg = vg?;
        let predicted = pt.theta0 - band_shift(params, &pt, eta)?;
        let mut included = true;
        if predicted / width > SHIFT_GAUGE_LIMIT {
            warnings.push(format!("eta {eta:e} excluded: predicted shift is {:.2} of the band width", predicted / width));
            included = false;
        }
        let measured = if vg.band.valid[i0] { t_floor - vg.band.theta_plus[i0] } else { f64::NAN };
        if !(measured > 0.0) {
            warnings.push(format!("eta {eta:e} excluded: measured shift {measured:e} is not inward"));
            included = false;
        }
        points.push(SweepPoint { parameter: eta, measured, predicted, included });
    }
    finish_sweep("eta_shift", points, 1.0 / 3.0, warnings)
}

fn finish_sweep(name: &str, points: Vec<SweepPoint>, target: f64, mut warnings: Vec<String>) -> Result<SweepResult> {
    let used: Vec<&SweepPoint> = points.iter().filter(|p| p.included).collect();
    if used.len() < 4 {
        return Err(Error::Config(format!("{name}: only {} usable points, a fit needs 4", used.len())));
    }
    let xs: Vec<f64> = used.iter().map(|p| p.parameter).collect();
    let ys: Vec<f64> = used.iter().map(|p| p.measured).collect();
    let fit = loglog_fit(&xs, &ys)?;
    if fit.low_confidence {
        warnings.push(format!("{name}: LOW-CONFIDENCE fit, slope stderr {:.3}", fit.stderr));
    }
    let ratios: Vec<f64> = used.iter().map(|p| p.measured / p.predicted).collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let spread = ratios.iter().map(|r| (r / mean - 1.0).abs()).fold(0.0, f64::max);
    Ok(SweepResult {
        name: name.to_string(),
        points,
        fit,
        target_slope: target,
        prefactor_ratio: mean,
        prefactor_spread: spread,
        warnings,
    })
}

/// Dimensional width scale (σ²/λ)(ΓΩ²/σ⁴)^{1/3}, all O(1) constants dropped.
pub fn width_scale(params: &ModelParams, gamma_lin: f64) -> f64 {
    let s2 = params.sigma * params.sigma;
    s2 / params.lambda * (gamma_lin * params.omega * params.omega / (s2 * s2)).cbrt()
}

/// Linear-cost band width at x = 0 against Γ.
pub fn gamma_width_sweep(params: &ModelParams, gammas: &[f64]) -> Result<SweepResult> {
    check_sweep_list("gamma", gammas)?;
    let comp = zero_eta_components(params, &[0.0])?;
    let widths: Vec<Result<f64>> = gammas.par_iter().map(|&g| find_band_zero(&comp, g, &[0.0]).map(|b| b.width(0))).collect();
    let mut warnings = Vec::new();
    let mut points = Vec::new();
    for (&g, w) in gammas.iter().zip(widths) {
        let predicted = width_scale(params, g);
        match w {
            Ok(w) if w > 0.0 => points.push(SweepPoint { parameter: g, measured: w, predicted, included: true }),
            Ok(w) => {
                warnings.push(format!("gamma {g:e} excluded: width {w:e}"));
                points.push(SweepPoint { parameter: g, measured: w, predicted, included: false });
            }
            Err(e) => {
                warnings.push(format!("gamma {g:e} excluded: {e}"));
                points.push(SweepPoint { parameter: g, measured: f64::NAN, predicted, included: false });
            }
        }
    }
    let mut res = finish_sweep("gamma_width", points, 1.0 / 3.0, warnings)?;
    // drift of the prefactor towards large Γ marks the end of the small-Γ regime
    let mut used: Vec<&SweepPoint> = res.points.iter().filter(|p| p.included).collect();
    used.sort_by(|a, b| a.parameter.total_cmp(&b.parameter));
    let r: Vec<f64> = used.iter().map(|p| p.measured / p.predicted).collect();
    let monotone = r.windows(2).all(|w| w[1] >= w[0]) || r.windows(2).all(|w| w[1] <= w[0]);
    if monotone && res.prefactor_spread > 0.02 {
        res.warnings.push(format!(
            "gamma_width: prefactor drifts monotonically ({:.4} to {:.4}), small-gamma regime ending",
            r[0],
            r[r.len() - 1]
        ));
    }
    Ok(res)
}

/// One row of the oracle/composite comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeRow {
    pub theta: f64,
    pub v_oracle: f64,
    pub v_composite: f64,
    pub regime_oracle: Regime,
    pub regime_composite: Regime,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    pub x: f64,
    pub eta: f64,
    pub theta_eta: f64,
    /// Regimes seen in the oracle slice, in the order NT, LAYER, SQRT, LINEAR.
    pub found: [bool; 4],
    pub layer_slope: f64,
    pub intermediate_slope: f64,
    pub far_slope: f64,
    /// Distance from Θ_η where the slope against that distance falls to 3/4.
    pub layer_width: f64,
    /// y₀η^{1/3}.
    pub layer_width_scale: f64,
    /// Distance from Θ_η where the slope against |θ| falls to 1.1.
    pub crossover: f64,
    /// (2λΘ₀ − μ)/λ.
    pub crossover_scale: f64,
    pub rows: Vec<RegimeRow>,
}

/// Local slope d ln|v| / d ln d at interior sample k of (d, |v|).
fn local_slopes(d: &[f64], v: &[f64]) -> Vec<f64> {
    (0..d.len())
        .map(|k| {
            if k == 0 || k + 1 == d.len() {
                f64::NAN
            } else {
                (v[k + 1].ln() - v[k - 1].ln()) / (d[k + 1].ln() - d[k - 1].ln())
            }
        })
        .collect()
}

/// First distance where `s` falls to `level` (linear interpolation), scanning outward.
fn first_below(d: &[f64], s: &[f64], level: f64, from: usize) -> Option<f64> {
    (from.max(1)..d.len() - 1).find_map(|k| {
        let (a, b) = (s[k - 1], s[k]);
        (a.is_finite() && b.is_finite() && a > level && b <= level).then(|| d[k - 1] + (d[k] - d[k - 1]) * (a - level) / (a - b))
    })
}

fn window_fit(d: &[f64], v: &[f64], lo: f64, hi: f64) -> f64 {
    let (xs, ys): (Vec<f64>, Vec<f64>) = d.iter().zip(v).filter(|(a, _)| **a >= lo && **a <= hi).map(|(a, b)| (*a, *b)).unzip();
    loglog_fit(&xs, &ys).map(|f| f.slope).unwrap_or(f64::NAN)
}

/// Zero of the oracle velocity at the '+' edge: the first two nodes with
/// v ≠ 0 past the last exact no-trade node below `near`, extrapolated linearly.
fn trading_edge(theta: &[f64], v: &[f64], near: f64) -> Result<f64> {
    let start = theta.iter().position(|&t| t >= near).unwrap_or(theta.len());
    let j0 = (0..start).rev().find(|&j| v[j] == 0.0).ok_or_else(|| Error::Regime("no no-trade node below the band edge".into()))?;
    let (a, b) = (j0 + 1, j0 + 2);
    if b >= theta.len() || v[b] == v[a] {
        return Err(Error::Resolution("cannot locate the zero of the trading speed".into()));
    }
    Ok((theta[a] - v[a] * (theta[b] - theta[a]) / (v[b] - v[a])).clamp(theta[j0], theta[a]))
}

/// Regime structure of the oracle velocity in the '+' sector at x.
///
/// Layer slope: fit over d ≤ layer_width/2. Intermediate slope: fit over
/// [3·layer_width, crossover/6]. Far slope: |v| against |θ| over
/// [2·crossover, 80% of the θ-extent].
pub fn regime_map(vg: &ValueGrid, comp: &MsComponents, x: f64) -> Result<RegimeReport> {
    let slice = velocity_slice(vg, x)?;
    let i = nearest(&vg.mesh.x, x);
    let xn = vg.mesh.x[i];
    let params = &vg.params;
    let eta = vg.costs.eta;
    if !slice.theta_eta.is_finite() {
        return Err(Error::Regime(format!("no band edge in the oracle slice at x = {xn}")));
    }
    let te = trading_edge(&slice.theta, &slice.v, slice.theta_eta)?;
    let pt = BandPoint::solve(comp, vg.costs.gamma_lin, xn)?;
    let c = layer_constants(params, &pt)?;
    let band0 = find_band_zero(comp, vg.costs.gamma_lin, &[xn])?;
    let composite = composite_velocity(params, &pt, band0.width(0), eta, &slice.theta)?;

    let theta_hi = slice.theta[slice.theta.len() - 1];
    let (d, av): (Vec<f64>, Vec<f64>) = slice
        .theta
        .iter()
        .zip(&slice.v)
        .filter(|(t, v)| **t > te && **v != 0.0)
        .map(|(t, v)| (t - te, v.abs()))
        .unzip();
    if d.len() < 8 {
        return Err(Error::Resolution(format!("only {} trading samples beyond the band edge", d.len())));
    }
    let s_edge = local_slopes(&d, &av);
    let th: Vec<f64> = d.iter().map(|v| v + te).collect();
    let s_zero = local_slopes(&th, &av);
    let layer_width = first_below(&d, &s_edge, 0.75, 1).unwrap_or(f64::NAN);
    let start = d.iter().position(|&v| v > layer_width).unwrap_or(d.len() - 1);
    let crossover = first_below(&d, &s_zero, 1.1, start).unwrap_or(f64::NAN);
    let layer_slope = window_fit(&d, &av, 0.0, 0.5 * layer_width);
    let intermediate_slope = window_fit(&d, &av, 3.0 * layer_width, crossover / 6.0);
    let far_slope = {
        let lo = te + 2.0 * crossover;
        let hi = 0.8 * theta_hi;
        let (xs, ys): (Vec<f64>, Vec<f64>) = th.iter().zip(&av).filter(|(t, _)| **t >= lo && **t <= hi).map(|(a, b)| (*a, *b)).unzip();
        loglog_fit(&xs, &ys).map(|f| f.slope).unwrap_or(f64::NAN)
    };
    let mut found = [false; 4];
    for r in &slice.regime {
        found[match r {
            Regime::NoTrade => 0,
            Regime::Layer => 1,
            Regime::Sqrt => 2,
            Regime::Linear => 3,
        }] = true;
    }
    let rows = (0..slice.theta.len())
        .filter(|&j| slice.theta[j] >= -band0.theta_minus[0])
        .map(|j| RegimeRow {
            theta: slice.theta[j],
            v_oracle: slice.v[j],
            v_composite: composite.v[j],
            regime_oracle: slice.regime[j],
            regime_composite: composite.regime[j],
        })
        .collect();
    Ok(RegimeReport {
        x: xn,
        eta,
        theta_eta: te,
        found,
        layer_slope,
        intermediate_slope,
        far_slope,
        layer_width,
        layer_width_scale: c.y0 * eta.cbrt(),
        crossover,
        crossover_scale: (2.0 * params.lambda * pt.theta0 - drift(params, xn)) / params.lambda,
        rows,
    })
}

/// Convenience: solves the oracle at η and 8η on one mesh and returns both
/// maps together with the layer-width ratio.
pub fn regime_pair(
    params: &ModelParams,
    gamma_lin: f64,
    eta: f64,
    grid: &SweepGrid,
    cfg: &SolverConfig,
    x: f64,
) -> Result<(RegimeReport, RegimeReport, f64)> {
    let comp = zero_eta_components(params, &grid.x)?;
    let mesh = build_mesh(params, gamma_lin, &grid.x, grid.theta_range, grid.ntheta, cfg)?;
    let maps: Vec<Result<RegimeReport>> = [eta, 8.0 * eta]
        .par_iter()
        .map(|&e| {
            let vg = solve_on_mesh(params, &CostParams::quadratic(gamma_lin, e)?, &mesh, cfg)?;
            regime_map(&vg, &comp, x)
        })
        .collect();
    let mut it = maps.into_iter();
    let a = it.next().expect("two maps")?;
    let b = it.next().expect("two maps")?;
    let ratio = b.layer_width / a.layer_width;
    Ok((a, b, ratio))
}

/// Inputs of the validity calculator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidityParams {
    /// γ in η = γσT^{3/2}/V.
    pub gamma_coeff: f64,
    /// φ in ℛ = φVσ.
    pub phi: f64,
    pub daily_volume: f64,
    /// Horizon T in days.
    pub horizon: f64,
}

impl ValidityParams {
    pub fn validate(&self) -> Result<()> {
        if [self.gamma_coeff, self.phi, self.daily_volume, self.horizon].iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config("validity parameters must all be positive".into()))
        }
    }

    pub fn risk_target(&self, params: &ModelParams) -> f64 {
        self.phi * self.daily_volume * params.sigma
    }
}

/// One inequality lhs ≪ rhs; `margin` = log10(rhs/lhs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Inequality {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub ok: bool,
}

impl Inequality {
    fn new(lhs: f64, rhs: f64, decades: f64) -> Self {
        let margin = (rhs / lhs).log10();
        Inequality { lhs, rhs, margin, ok: margin >= decades }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidityReport {
    pub eta: f64,
    pub risk_target: f64,
    /// η/Γ^{4/3} against λ/(σΩ)^{4/3}.
    pub lambda_form: Inequality,
    /// η/Γ^{4/3} against σ^{2/3}/(ℛΩ^{5/6}).
    pub risk_form: Inequality,
    /// γφ against (Γ/σ√T)^{4/3}(ΩT)^{−5/6}.
    pub dimensionless: Inequality,
}

pub fn validity_report(params: &ModelParams, gamma_lin: f64, vp: &ValidityParams, margin_decades: f64) -> Result<ValidityReport> {
    params.validate()?;
    vp.validate()?;
    if !(gamma_lin > 0.0) {
        return Err(Error::Config(format!("gamma_lin must be > 0, got {gamma_lin}")));
    }
    let (s, o, t) = (params.sigma, params.omega, vp.horizon);
    let eta = vp.gamma_coeff * s * t.powf(1.5) / vp.daily_volume;
    let r = vp.risk_target(params);
    let g43 = gamma_lin.powf(4.0 / 3.0);
    Ok(ValidityReport {
        eta,
        risk_target: r,
        lambda_form: Inequality::new(eta / g43, params.lambda / (s * o).powf(4.0 / 3.0), margin_decades),
        risk_form: Inequality::new(eta / g43, s.powf(2.0 / 3.0) / (r * o.powf(5.0 / 6.0)), margin_decades),
        dimensionless: Inequality::new(
            vp.gamma_coeff * vp.phi,
            (gamma_lin / (s * t.sqrt())).powf(4.0 / 3.0) * (o * t).powf(-5.0 / 6.0),
            margin_decades,
        ),
    })
}

#[cfg(test)]
mod tests;
