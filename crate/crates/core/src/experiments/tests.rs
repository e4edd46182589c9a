use super::*;
use crate::model::{linspace, markowitz};

#[test]
fn loglog_fit_recovers_power_law() {
    let x = [1e-8, 1e-7, 1e-6, 1e-5, 1e-4];
    let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.0 / 3.0)).collect();
    let f = loglog_fit(&x, &y).unwrap();
    assert!((f.slope - 1.0 / 3.0).abs() < 1e-12);
    assert!((f.intercept - 3f64.ln()).abs() < 1e-10);
    assert!(f.stderr < 1e-10);
    assert!(!f.low_confidence);
}

#[test]
fn loglog_fit_flags_scatter() {
    let x = [1.0, 10.0, 100.0, 1000.0];
    let y = [1.0, 5.0, 3.0, 40.0];
    let f = loglog_fit(&x, &y).unwrap();
    assert!(f.low_confidence);
    assert!(loglog_fit(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    assert!(matches!(loglog_fit(&[1.0, -2.0, 3.0], &[1.0, 2.0, 3.0]), Err(Error::Domain(_))));
}

#[test]
fn sweep_lists_validated() {
    assert!(check_sweep_list("eta", &[1e-8, 1e-7, 1e-6]).is_err());
    assert!(check_sweep_list("eta", &[1e-8, 1e-7, 2e-7, 5e-7]).is_err());
    assert!(check_sweep_list("eta", &[1e-8, 1e-7, 1e-6, -1.0]).is_err());
    assert!(check_sweep_list("eta", &[1e-8, 1e-7, 1e-6, 1e-5]).is_ok());
}

#[test]
fn gamma_width_scaling() {
    let p = ModelParams::desk();
    let gammas = [1e-6, 4.64e-6, 2.15e-5, 1e-4, 4.64e-4];
    let r = gamma_width_sweep(&p, &gammas).unwrap();
    assert!(r.slope_within(0.30, 0.36), "slope {}", r.fit.slope);
    assert!(r.prefactor_spread < 0.15, "spread {}", r.prefactor_spread);
}

fn desk_validity() -> ValidityParams {
    ValidityParams { gamma_coeff: 0.1, phi: 1e-3, daily_volume: 1e7, horizon: 1.0 }
}

#[test]
fn validity_forms_consistent() {
    let p = ModelParams::desk();
    let vp = desk_validity();
    // choose λ so that the risk-target relation ℛ ≈ √Ω σ²/2λ holds exactly
    let r = vp.risk_target(&p);
    let p = ModelParams { lambda: p.omega.sqrt() * p.sigma * p.sigma / (2.0 * r), ..p };
    let rep = validity_report(&p, 1e-4, &vp, 1.0).unwrap();
    assert_eq!(rep.lambda_form.lhs, rep.risk_form.lhs);
    // the two right-hand sides differ only by the dropped factor 2
    assert!((rep.risk_form.rhs / rep.lambda_form.rhs - 2.0).abs() < 1e-12);
    // the dimensionless form is the risk form with η and ℛ substituted
    let ratio_r = rep.risk_form.rhs / rep.risk_form.lhs;
    let ratio_d = rep.dimensionless.rhs / rep.dimensionless.lhs;
    assert!((ratio_r / ratio_d - 1.0).abs() < 1e-12);
}

#[test]
fn validity_independent_of_volume() {
    let p = ModelParams::desk();
    let a = validity_report(&p, 1e-4, &desk_validity(), 1.0).unwrap();
    let b = validity_report(&p, 1e-4, &ValidityParams { daily_volume: 3.7e9, ..desk_validity() }, 1.0).unwrap();
    assert!((a.dimensionless.margin - b.dimensionless.margin).abs() < 1e-12);
    assert!((a.risk_form.margin - b.risk_form.margin).abs() < 1e-12);
    assert!(a.eta > b.eta);
    assert!(validity_report(&p, 1e-4, &ValidityParams { phi: 0.0, ..desk_validity() }, 1.0).is_err());
}

fn desk_grid(nx: usize) -> SweepGrid {
    let p = ModelParams::desk();
    let (a, b) = p.default_x_domain(6.0);
    let m = markowitz(&p, a).abs().max(markowitz(&p, b).abs());
    SweepGrid { x: linspace(a, b, nx), theta_range: (-4.0 * m, 4.0 * m), ntheta: 801 }
}

#[test]
fn regime_structure_at_desk() {
    let p = ModelParams::desk();
    let (a, b, ratio) = regime_pair(&p, 2e-4, 1e-7, &desk_grid(41), &SolverConfig::default(), 0.0).unwrap();
    for r in [&a, &b] {
        assert_eq!(r.found, [true; 4]);
        assert!((r.layer_slope - 1.0).abs() < 0.2, "{}", r.layer_slope);
        assert!((r.intermediate_slope - 0.5).abs() < 0.1, "{}", r.intermediate_slope);
        assert!((r.far_slope - 1.0).abs() < 0.1, "{}", r.far_slope);
        // the width where the slope reaches 3/4 tracks y0 η^{1/3}
        assert!((r.layer_width / r.layer_width_scale - 1.0).abs() < 0.15);
        assert!(r.rows.iter().any(|row| row.regime_composite == Regime::Layer));
    }
    assert!((ratio - 2.0).abs() < 0.4, "{ratio}");
}

#[test]
fn eta_shift_exponent() {
    let p = ModelParams::desk();
    let etas = [1e-7, 10f64.powf(-6.5), 1e-6, 10f64.powf(-5.5), 1e-5];
    let r = eta_shift_sweep(&p, 2e-4, &etas, &desk_grid(21), &SolverConfig::default()).unwrap();
    assert!(r.points.iter().all(|q| q.included));
    assert!(r.slope_within(0.28, 0.38), "{}", r.fit.slope);
}

#[test]
fn eta_shift_rejects_short_sweep() {
    let p = ModelParams::desk();
    let e = eta_shift_sweep(&p, 2e-4, &[1e-6], &desk_grid(21), &SolverConfig::default());
    assert!(matches!(e, Err(Error::Config(_))));
}
