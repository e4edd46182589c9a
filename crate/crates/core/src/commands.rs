//! Subcommand bodies. Each computes, writes its files into an [`OutputDir`]
//! and returns the text summary; exit codes come from the error type.

use crate::asymptotics::{
    abel_layer_solve, airy_layer_value, composite_velocity, layer_constants, layer_ode_residual, outer_velocity, BandPoint,
    LayerConstants, LayerProfile,
};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::experiments::{eta_shift_sweep, gamma_width_sweep, regime_pair, validity_report, Inequality, RegimeReport, SweepGrid, SweepResult};
use crate::hjb::{c2_continuity_check, solve_hjb, SolverConfig};
use crate::model::{linspace, CostKind};
use crate::ms::{
    check_gprime_identity, find_band_zero, half_width_estimate, second_derivative_at_band, third_derivative_at_band, Band,
};
use crate::output::{band_script, loglog_script, num, regime_script, Csv, OutputDir, Summary};
use crate::registry::{band_method, layer_model, zero_eta_components, BandRequest};

fn sweep_grid(cfg: &RunConfig) -> Result<SweepGrid> {
    Ok(SweepGrid { x: cfg.x_nodes()?, theta_range: cfg.theta_range()?, ntheta: cfg.grid.ntheta })
}

fn band_request(cfg: &RunConfig) -> Result<BandRequest> {
    Ok(BandRequest {
        params: cfg.model,
        costs: cfg.cost,
        x: cfg.x_nodes()?,
        theta_range: cfg.theta_range()?,
        ntheta: cfg.grid.ntheta,
        solver: cfg.solver.clone(),
    })
}

/// Columns x, theta_plus, theta_minus, theta_plus_deriv, v3, valid.
pub fn band_table(band: &Band, v3: &[f64]) -> Csv {
    let mut t = Csv::new(&["x", "theta_plus", "theta_minus", "theta_plus_deriv", "v3", "valid"]);
    for i in 0..band.len() {
        let ok = band.valid[i];
        let pick = |v: f64| num(if ok { v } else { f64::NAN });
        t.row([
            num(band.x_nodes[i]),
            pick(band.theta_plus[i]),
            pick(band.theta_minus[i]),
            pick(band.theta_plus_deriv[i]),
            pick(v3[i]),
            u8::from(ok).to_string(),
        ]);
    }
    t
}

fn band_notes(s: &mut Summary, band: &Band) {
    let valid = band.valid.iter().filter(|v| **v).count();
    s.entry("x-nodes", band.len()).entry("resolved nodes", valid);
    if let Some(i) = band.x_nodes.iter().enumerate().min_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).map(|(i, _)| i) {
        if band.valid[i] {
            s.entry("width at x nearest 0", num(band.width(i)));
        }
    }
    if valid == 0 {
        s.note("no x-node has a no-trade band edge inside the grid");
    }
}

pub fn band(cfg: &RunConfig, out: &mut OutputDir) -> Result<Summary> {
    let req = band_request(cfg)?;
    let method = band_method(&cfg.band.method)?;
    let band = method.band(&req)?;
    let v3 = if method.name() == "ms" {
        let comp = zero_eta_components(&req.params, &req.x)?;
        (0..band.len())
            .map(|i| if band.valid[i] { third_derivative_at_band(&comp, &band, band.x_nodes[i]).unwrap_or(f64::NAN) } else { f64::NAN })
            .collect()
    } else {
        vec![f64::NAN; band.len()]
    };
    out.csv("band.csv", &band_table(&band, &v3))?;
    out.write("band.gp", &band_script("band.csv", "band.png"))?;
    let mut s = Summary::new(&format!("band ({})", method.name()));
    s.entry("gamma_lin", num(cfg.cost.gamma_lin)).entry("eta", num(cfg.cost.eta));
    band_notes(&mut s, &band);
    Ok(s)
}

/// Layer constants from the config or from the zero-eta band at layer.x.
fn layer_inputs(cfg: &RunConfig) -> Result<(f64, f64)> {
    match (cfg.layer.a, cfg.layer.b) {
        (Some(a), Some(b)) => Ok((a, b)),
        (None, None) if cfg.cost.kind == CostKind::Quadratic => {
            let comp = zero_eta_components(&cfg.model, &[cfg.layer.x])?;
            let c = layer_constants(&cfg.model, &BandPoint::solve(&comp, cfg.cost.gamma_lin, cfg.layer.x)?)?;
            Ok((c.a, c.b))
        }
        (None, None) => Err(Error::Config("layer.a and layer.b are required for the three_halves cost".into())),
        _ => Err(Error::Config("give both layer.a and layer.b or neither".into())),
    }
}

/// y-scale on which the layer equation has unit coefficients.
fn natural_scale(kind: CostKind, a: f64, b: f64) -> f64 {
    match kind {
        CostKind::Quadratic => (b / a).powf(2.0 / 3.0),
        CostKind::ThreeHalves => (b.powi(3) / a.powi(4)).powf(0.2),
    }
}

fn layer_profile(cfg: &RunConfig) -> Result<LayerProfile> {
    let (a, b) = layer_inputs(cfg)?;
    let model = layer_model(cfg.cost.kind);
    if b == 0.0 {
        return Err(Error::Degenerate("layer constant B vanishes: the band is flat at this x".into()));
    }
    model.profile(a, b, cfg.layer.extent * natural_scale(cfg.cost.kind, a, b), cfg.layer.n)
}

pub fn layer(cfg: &RunConfig, out: &mut OutputDir) -> Result<Summary> {
    let prof = layer_profile(cfg)?;
    let col = if cfg.cost.kind == CostKind::Quadratic { "F" } else { "G" };
    let mut t = Csv::new(&["y", col]);
    for (y, f) in prof.y.iter().zip(&prof.f) {
        t.nums(&[*y, *f]);
    }
    out.csv("layer.csv", &t)?;
    let c = &prof.constants;
    let mut s = Summary::new(&format!("layer ({})", layer_model(cfg.cost.kind).name()));
    s.entry("A", num(c.a))
        .entry("B", num(c.b))
        .entry("y0", num(c.y0))
        .entry("slope at 0", num(prof.slope_at_zero))
        .entry("ODE residual", format!("{:.3e}", layer_ode_residual(&prof)))
        .entry("samples", prof.y.len());
    Ok(s)
}

pub fn hjb(cfg: &RunConfig, out: &mut OutputDir) -> Result<Summary> {
    let vg = solve_hjb(&cfg.model, &cfg.cost, &cfg.x_nodes()?, cfg.theta_range()?, cfg.grid.ntheta, &cfg.solver)?;
    let mut t = Csv::new(&["x", "theta", "V", "v"]);
    for j in 0..vg.mesh.nxi() {
        for i in 0..vg.mesh.nx() {
            t.nums(&[vg.mesh.x[i], vg.theta(i, j), vg.v_at(i, j), vg.velocity_at(i, j)]);
        }
    }
    out.csv("value.csv", &t)?;
    out.csv("band.csv", &band_table(&vg.band, &vec![f64::NAN; vg.band.len()]))?;
    out.write("band.gp", &band_script("band.csv", "band.png"))?;
    let mut log = Csv::new(&["iteration", "max_update"]);
    for (k, r) in vg.history.iter().enumerate() {
        log.row([(k + 1).to_string(), num(*r)]);
    }
    out.csv("residual_log.csv", &log)?;
    let mut s = Summary::new("hjb");
    s.entry("iterations", vg.iterations)
        .entry("final residual", format!("{:.3e}", vg.residual))
        .entry("tolerance", format!("{:.3e}", cfg.solver.convergence_tol))
        .entry("mesh", format!("{} x {}", vg.mesh.nx(), vg.mesh.nxi()));
    band_notes(&mut s, &vg.band);
    Ok(s)
}

fn sweep_table(r: &SweepResult, param: &str, measured: &str) -> Csv {
    let mut t = Csv::new(&[param, measured, "predicted", "included"]);
    for p in &r.points {
        t.row([num(p.parameter), num(p.measured), num(p.predicted), u8::from(p.included).to_string()]);
    }
    t
}

fn sweep_notes(s: &mut Summary, r: &SweepResult) {
    s.entry(&format!("{} slope", r.name), format!("{:.4} +- {:.4} (target {:.4})", r.fit.slope, r.fit.stderr, r.target_slope))
        .entry(&format!("{} prefactor ratio", r.name), format!("{:.4}", r.prefactor_ratio))
        .entry(&format!("{} points used", r.name), format!("{} of {}", r.points.iter().filter(|p| p.included).count(), r.points.len()));
    if r.fit.low_confidence {
        s.note(format!("{}: low-confidence fit", r.name));
    }
    for w in &r.warnings {
        s.note(w.clone());
    }
}

fn regime_table(r: &RegimeReport) -> Csv {
    let mut t = Csv::new(&["theta", "v", "regime", "v_composite", "regime_composite"]);
    for row in &r.rows {
        t.row([num(row.theta), num(row.v_oracle), row.regime_oracle.label().into(), num(row.v_composite), row.regime_composite.label().into()]);
    }
    t
}

pub fn sweep(cfg: &RunConfig, out: &mut OutputDir) -> Result<Summary> {
    let sw = &cfg.sweep;
    if sw.etas.is_empty() && sw.gammas.is_empty() && !sw.regime {
        return Err(Error::Config("sweep section selects nothing: give etas, gammas or regime".into()));
    }
    let mut s = Summary::new("sweep");
    if !sw.etas.is_empty() {
        let r = eta_shift_sweep(&cfg.model, cfg.cost.gamma_lin, &sw.etas, &sweep_grid(cfg)?, &cfg.solver)?;
        out.csv("eta_shift.csv", &sweep_table(&r, "eta", "shift"))?;
        out.write("eta_shift.gp", &loglog_script("eta_shift.csv", "eta_shift.png", "eta", "band shift", r.fit.slope, r.fit.intercept))?;
        sweep_notes(&mut s, &r);
    }
    if !sw.gammas.is_empty() {
        let r = gamma_width_sweep(&cfg.model, &sw.gammas)?;
        out.csv("gamma_width.csv", &sweep_table(&r, "gamma", "width"))?;
        out.write("gamma_width.gp", &loglog_script("gamma_width.csv", "gamma_width.png", "gamma", "band width", r.fit.slope, r.fit.intercept))?;
        sweep_notes(&mut s, &r);
    }
    if sw.regime {
        let (a, b, ratio) = regime_pair(&cfg.model, cfg.cost.gamma_lin, cfg.cost.eta, &sweep_grid(cfg)?, &cfg.solver, sw.regime_x)?;
        out.csv("regime_eta.csv", &regime_table(&a))?;
        out.csv("regime_8eta.csv", &regime_table(&b))?;
        let files = [("regime_eta.csv".to_string(), "eta".to_string()), ("regime_8eta.csv".to_string(), "8 eta".to_string())];
        out.write("regime.gp", &regime_script(&files, "regime.png"))?;
        for (tag, r) in [("eta", &a), ("8eta", &b)] {
            s.entry(
                &format!("regime {tag} slopes"),
                format!("layer {:.3}, intermediate {:.3}, far {:.3}", r.layer_slope, r.intermediate_slope, r.far_slope),
            );
            if !r.found.iter().all(|f| *f) {
                s.note(format!("regime {tag}: not every regime appears in the numeric slice"));
            }
        }
        s.entry("layer width ratio (8 eta / eta)", format!("{ratio:.4}"));
    }
    Ok(s)
}

/// One row of the property table.
#[derive(Debug, Clone, PartialEq)]
pub struct Property {
    pub name: &'static str,
    pub value: f64,
    pub limit: String,
    pub pass: bool,
}

impl Property {
    fn at_most(name: &'static str, value: f64, tol: f64) -> Self {
        Property { name, value, limit: format!("<= {tol:.0e}"), pass: value <= tol }
    }

    fn positive(name: &'static str, value: f64) -> Self {
        Property { name, value, limit: "> 0".into(), pass: value > 0.0 }
    }
}

/// The property suite for the configured problem.
pub fn properties(cfg: &RunConfig) -> Result<Vec<Property>> {
    let p = &cfg.model;
    let g = cfg.cost.gamma_lin;
    let xs = cfg.x_nodes()?;
    let comp = zero_eta_components(p, &xs)?;
    let mut props = Vec::new();

    let pair = comp.pair();
    let (lo, hi) = pair.domain();
    let scaled = |x: f64| pair.wronskian(x) * (-p.omega * x * x / (p.sigma * p.sigma)).exp();
    let w0 = scaled(0.0);
    let drift = linspace(lo, hi, 101).into_iter().map(|x| ((scaled(x) - w0) / w0).abs()).fold(0.0, f64::max);
    props.push(Property::at_most("Wronskian constancy", drift, 1e-6));

    let band = find_band_zero(&comp, g, &xs)?;
    let mut v2: f64 = 0.0;
    let mut v3 = f64::INFINITY;
    for (i, &x) in xs.iter().enumerate().filter(|(i, _)| band.valid[*i]) {
        v2 = v2.max((second_derivative_at_band(&comp, g, x)? * band.width(i) / g).abs());
        v3 = v3.min(third_derivative_at_band(&comp, &band, x)?);
    }
    props.push(Property::at_most("zero-eta V_tt at band (scaled)", v2, 1e-6));
    props.push(Property::positive("zero-eta V_ttt at band (min)", v3));
    let w = half_width_estimate(p, g);
    let x_in = [0.0, 0.25 * xs[xs.len() - 1], 0.25 * xs[0]];
    let mut gap: f64 = 0.0;
    for x in x_in {
        gap = gap.max(check_gprime_identity(&comp, &find_band_zero(&comp, g, &[x])?, x, 0.05 * w)?.relative_gap());
    }
    props.push(Property::at_most("g' identity gap", gap, 1e-2));

    // Layer profile, optionally perturbed to exercise the failure path.
    let mut prof = layer_profile(cfg)?;
    let k = 1.0 + cfg.check.perturb_layer;
    prof.f.iter_mut().chain(prof.f_y.iter_mut()).for_each(|v| *v *= k);
    props.push(Property::at_most("layer ODE residual", layer_ode_residual(&prof), 1e-8));
    if cfg.cost.kind == CostKind::Quadratic {
        let c = LayerConstants::from_ab(prof.constants.a, prof.constants.b)?;
        let h = (c.b / c.a).powf(2.0 / 3.0) * 1e-3;
        let fd = (airy_layer_value(&c, h).0 - airy_layer_value(&c, -h).0) / (2.0 * h);
        props.push(Property::at_most("layer slope at 0 vs difference quotient", ((fd - prof.slope_at_zero) / prof.slope_at_zero).abs(), 1e-6));

        // matching: inner profile → A√y far out, outer speed → the same √ law near Θ₀
        let pt = BandPoint::solve(&comp, g, cfg.layer.x)?;
        let lc = layer_constants(p, &pt)?;
        let y = 100.0 * natural_scale(CostKind::Quadratic, lc.a, lc.b);
        let inner = airy_layer_value(&lc, y).0 / (lc.a * (y - lc.y0).sqrt());
        props.push(Property::at_most("inner far-field matching gap", (inner - 1.0).abs(), 1e-3));
        let d = 1e-3 * w;
        let eta = cfg.cost.eta;
        let outer = outer_velocity(p, &pt, pt.theta0 + d, eta)? / (-lc.a * d.sqrt() / (2.0 * eta.sqrt()));
        props.push(Property::at_most("outer near-field matching gap", (outer - 1.0).abs(), 1e-2));
        let ib = xs.iter().enumerate().min_by(|a, b| (a.1 - cfg.layer.x).abs().total_cmp(&(b.1 - cfg.layer.x).abs())).map(|(i, _)| i).unwrap_or(0);
        let width = if band.valid[ib] { band.width(ib) } else { 2.0 * w };
        let gauge = composite_velocity(p, &pt, width, eta, &[pt.theta0])?.gauge;
        props.push(Property { name: "shift / band width (gauge)", value: gauge, limit: "<= 2e-1".into(), pass: gauge <= 0.2 });

        // boundary continuity of the numerical solution under ξ-refinement
        let solve = |f: f64| {
            solve_hjb(p, &cfg.cost, &xs, cfg.theta_range()?, cfg.grid.ntheta.min(201), &SolverConfig { fine_step: Some(f * w), ..cfg.solver.clone() })
        };
        let r = c2_continuity_check(&solve(8e-3)?, &solve(4e-3)?)?;
        props.push(Property { name: "second-difference jump order", value: r.order_second, limit: ">= 1".into(), pass: r.order_second >= 1.0 });
        props.push(Property { name: "first-difference jump order", value: r.order_first, limit: ">= 2".into(), pass: r.order_first >= 2.0 });
    } else {
        let c = &prof.constants;
        let far = abel_layer_solve(c.a, c.b, 200.0 * natural_scale(CostKind::ThreeHalves, c.a, c.b), 8001)?;
        let n = far.y.len() - 1;
        let ratio = far.f[n] / (c.a * c.a * far.y[n]).cbrt();
        props.push(Property::at_most("Abel far-field ratio gap", (ratio - 1.0).abs(), 2e-2));
    }
    Ok(props)
}

pub fn check(cfg: &RunConfig, out: &mut OutputDir) -> Result<(Summary, bool)> {
    let props = properties(cfg)?;
    let mut t = Csv::new(&["property", "value", "limit", "status"]);
    let mut s = Summary::new("check");
    for q in &props {
        let status = if q.pass { "PASS" } else { "FAIL" };
        t.row([q.name.to_string(), num(q.value), q.limit.clone(), status.into()]);
        s.entry(q.name, format!("{status}  {:.3e} ({})", q.value, q.limit));
    }
    out.csv("check.csv", &t)?;
    let all = props.iter().all(|q| q.pass);
    s.entry("overall", if all { "PASS" } else { "FAIL" });
    Ok((s, all))
}

fn inequality(s: &mut Summary, name: &str, q: &Inequality) {
    s.entry(name, format!("{:.4e} << {:.4e}  margin {:.2} decades  {}", q.lhs, q.rhs, q.margin, if q.ok { "ok" } else { "violated" }));
}

pub fn validate(cfg: &RunConfig, out: &mut OutputDir) -> Result<Summary> {
    let v = cfg.validity.as_ref().ok_or_else(|| Error::Config("validate needs a validity section".into()))?;
    let r = validity_report(&cfg.model, cfg.cost.gamma_lin, &v.params(), v.margin_decades)?;
    let mut t = Csv::new(&["form", "lhs", "rhs", "margin_decades", "ok"]);
    let mut s = Summary::new("validity");
    s.entry("eta", num(r.eta)).entry("risk target", num(r.risk_target));
    for (name, q) in [("lambda form", &r.lambda_form), ("risk form", &r.risk_form), ("dimensionless", &r.dimensionless)] {
        t.row([name.to_string(), num(q.lhs), num(q.rhs), num(q.margin), u8::from(q.ok).to_string()]);
        inequality(&mut s, name, q);
    }
    out.csv("validity.csv", &t)?;
    Ok(s)
}

#[cfg(test)]
mod tests;
