use super::*;

fn desk(extra: &str) -> RunConfig {
    let base = r#"{"model": {"sigma": 0.02, "omega": 0.1, "lambda": 1.0, "rho": 0.001},
        "cost": {"gamma_lin": 1e-4, "eta": 1e-5}"#;
    RunConfig::parse(&format!("{base}{extra}}}")).unwrap()
}

#[test]
fn desk_properties_all_pass() {
    let props = properties(&desk("")).unwrap();
    assert!(props.iter().all(|q| q.pass), "{props:?}");
    assert!(props.len() >= 10);
}


#[test]
fn perturbed_layer_fails_residual_row() {
    let cfg = desk(r#", "check": {"perturb_layer": 1e-3}, "grid": {"nx": 11, "ntheta": 101}"#);
    let props = properties(&cfg).unwrap();
    let failed: Vec<&str> = props.iter().filter(|q| !q.pass).map(|q| q.name).collect();
    assert!(failed.contains(&"layer ODE residual"), "{failed:?}");
}

#[test]
fn flat_band_layer_is_degenerate() {
    let cfg = desk(r#", "layer": {"a": 1.0, "b": 0.0}"#);
    let e = layer(&cfg, &mut OutputDir::new(tempfile::tempdir().unwrap().path())).unwrap_err();
    assert_eq!(e.exit_code(), 3);
    let cfg = desk(r#", "layer": {"a": 1.0}"#);
    assert!(matches!(layer_profile(&cfg), Err(Error::Config(_))));
}

#[test]
fn natural_scale_normalises_coefficients() {
    // with y = s·u and F = g·f, both kinds reduce to f^p − f_u = u − u₀
    let (a, b) = (0.7, 0.3);
    let s = natural_scale(CostKind::Quadratic, a, b);
    let g = b / s;
    assert!((g * g - a * a * s).abs() < 1e-12);
    let s = natural_scale(CostKind::ThreeHalves, a, b);
    let g = (b / s).sqrt();
    assert!((g.powi(3) - a * a * s).abs() < 1e-12);
}

#[test]
fn sweep_without_selection_rejected() {
    let e = sweep(&desk(""), &mut OutputDir::new(tempfile::tempdir().unwrap().path())).unwrap_err();
    assert_eq!(e.exit_code(), 2);
}
