use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const MODEL: &str = r#""model": {"sigma": 0.02, "omega": 0.1, "lambda": 1.0, "rho": 0.001}"#;

struct Run {
    dir: TempDir,
}

impl Run {
    fn new() -> Self {
        Run { dir: tempfile::tempdir().unwrap() }
    }

    fn out(&self) -> PathBuf {
        self.dir.path().join("out")
    }

    /// Writes `body` (the JSON after the model section) and runs `cmd`.
    fn exec(&self, cmd: &str, body: &str) -> Output {
        let cfg = self.dir.path().join("config.json");
        fs::write(&cfg, format!("{{{MODEL}, {body}}}")).unwrap();
        self.exec_path(cmd, &cfg, &[])
    }

    fn exec_path(&self, cmd: &str, cfg: &Path, extra: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_bandlayer"))
            .args([cmd, "--config"])
            .arg(cfg)
            .arg("--out")
            .arg(self.out())
            .args(extra)
            .output()
            .unwrap()
    }

    fn read(&self, name: &str) -> String {
        fs::read_to_string(self.out().join(name)).unwrap()
    }
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const DESK_COST: &str = r#""cost": {"gamma_lin": 1e-4, "eta": 1e-5}"#;

#[test]
fn band_writes_one_row_per_node_in_the_csv_dialect() {
    let r = Run::new();
    let o = r.exec("band", &format!(r#"{DESK_COST}, "grid": {{"nx": 17}}"#));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = r.read("band.csv");
    assert!(!csv.contains('\r') && csv.ends_with('\n'));
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "x,theta_plus,theta_minus,theta_plus_deriv,v3,valid");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 17);
    for row in rows {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f.len(), 6);
        assert_eq!(f[5], "1");
        let mantissa = f[1].split('e').next().unwrap().trim_start_matches('-').replace('.', "");
        assert_eq!(mantissa.len(), 17);
        assert!(f[1].parse::<f64>().unwrap() + f[2].parse::<f64>().unwrap() > 0.0);
    }
    assert!(r.read("summary.txt").starts_with("band (ms)"));
    assert!(r.out().join("band.gp").exists());
}

#[test]
fn band_methods_selectable() {
    let r = Run::new();
    let o = r.exec("band", &format!(r#"{DESK_COST}, "grid": {{"nx": 9, "ntheta": 201}}, "band": {{"method": "asymptotic"}}"#));
    assert_eq!(code(&o), 0);
    assert_eq!(r.read("band.csv").lines().count(), 10);
    let o = r.exec("band", &format!(r#"{DESK_COST}, "band": {{"method": "simplex"}}"#));
    assert_eq!(code(&o), 2);
}

#[test]
fn config_errors_exit_2() {
    let r = Run::new();
    assert_eq!(code(&r.exec("band", r#""cost": {"gamma_lin": 0, "eta": 1e-5}"#)), 2);
    assert_eq!(code(&r.exec("band", r#""cost": {"gamma_lin": 1e-4, "eta": 1e-5, "mu": 1}"#)), 2);
    assert_eq!(code(&r.exec("band", r#""cost": {"gamma_lin": 1e-4}, "colour": "red""#)), 2);
    let o = r.exec_path("band", &r.dir.path().join("missing.json"), &[]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot read"));
    fs::write(r.dir.path().join("broken.json"), "{ not json").unwrap();
    assert_eq!(code(&r.exec_path("band", &r.dir.path().join("broken.json"), &[])), 2);
}

#[test]
fn layer_profiles() {
    let r = Run::new();
    assert_eq!(code(&r.exec("layer", DESK_COST)), 0);
    let csv = r.read("layer.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "y,F");
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first, [0.0, 0.0]);

    let o = r.exec("layer", r#""cost": {"gamma_lin": 1e-4, "zeta": 1e-5, "kind": "three_halves"}, "layer": {"a": 0.7, "b": 0.3}"#);
    assert_eq!(code(&o), 0);
    let csv = r.read("layer.csv");
    assert!(csv.starts_with("y,G\n0.0000000000000000e0,0.0000000000000000e0\n"));

    let o = r.exec("layer", &format!(r#"{DESK_COST}, "layer": {{"a": 1.0, "b": 0.0}}"#));
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("flat"));
}

#[test]
fn hjb_outputs_and_exit_codes() {
    let r = Run::new();
    let o = r.exec("hjb", &format!(r#"{DESK_COST}, "grid": {{"nx": 11, "ntheta": 201}}"#));
    assert_eq!(code(&o), 0);
    let log = r.read("residual_log.csv");
    assert!(log.starts_with("iteration,max_update\n"));
    let last: f64 = log.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!(last <= 1e-10, "{last}");
    let value = r.read("value.csv");
    assert!(value.starts_with("x,theta,V,v\n"));
    assert_eq!((value.lines().count() - 1) % 11, 0);
    assert_eq!(r.read("band.csv").lines().count(), 12);

    let o = r.exec("hjb", &format!(r#"{DESK_COST}, "grid": {{"nx": 11, "ntheta": 201}}, "solver": {{"max_iters": 1}}"#));
    assert_eq!(code(&o), 4);

    let o = r.exec("hjb", r#""cost": {"gamma_lin": 1e3, "eta": 1e-5}, "grid": {"nx": 11, "ntheta": 101}"#);
    assert_eq!(code(&o), 0);
    assert!(r.read("band.csv").lines().skip(1).all(|l| l.ends_with(",0")));
    assert!(r.read("summary.txt").contains("no x-node has a no-trade band"));
}

const SWEEP: &str = r#""cost": {"gamma_lin": 2e-4, "eta": 1e-7}, "grid": {"nx": 21, "ntheta": 801}"#;

#[test]
fn sweep_reports_and_is_deterministic() {
    let body = format!(
        r#"{SWEEP}, "sweep": {{"etas": [1e-7, 1e-6, 1e-5, 1e-4], "gammas": [1e-6, 1e-5, 1e-4, 1e-3], "regime": true}}"#
    );
    let a = Run::new();
    assert_eq!(code(&a.exec("sweep", &body)), 0);
    let b = Run::new();
    assert_eq!(code(&b.exec("sweep", &body)), 0);
    for f in ["eta_shift.csv", "gamma_width.csv", "regime_eta.csv", "regime_8eta.csv"] {
        assert_eq!(a.read(f), b.read(f), "{f} differs between runs");
    }
    let summary = a.read("summary.txt");
    assert!(summary.contains("eta_shift slope"));
    assert!(summary.contains("layer width ratio"));
    assert!(a.read("eta_shift.gp").contains("eta_shift.csv"));
    assert!(a.read("regime.gp").contains("regime_8eta.csv"));
    let header = a.read("regime_eta.csv").lines().next().unwrap().to_string();
    assert_eq!(header, "theta,v,regime,v_composite,regime_composite");
}

#[test]
fn sweep_point_outside_validity_is_excluded_with_warning() {
    let r = Run::new();
    let o = r.exec("sweep", &format!(r#"{SWEEP}, "sweep": {{"etas": [1e-7, 1e-6, 1e-5, 1e-4, 1e-1]}}"#));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = r.read("eta_shift.csv");
    assert!(csv.lines().last().unwrap().ends_with(",0"));
    assert!(r.read("summary.txt").contains("excluded"));
}

#[test]
fn single_point_sweep_exits_2() {
    let r = Run::new();
    assert_eq!(code(&r.exec("sweep", &format!(r#"{SWEEP}, "sweep": {{"etas": [1e-6]}}"#))), 2);
    assert_eq!(code(&r.exec("sweep", &format!(r#"{SWEEP}, "sweep": {{"gammas": [1e-4]}}"#))), 2);
    assert_eq!(code(&r.exec("sweep", SWEEP)), 2);
}

#[test]
fn check_table_and_perturbation_hook() {
    let r = Run::new();
    let o = r.exec("check", &format!(r#"{DESK_COST}, "grid": {{"nx": 21, "ntheta": 201}}"#));
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let table = r.read("check.csv");
    assert!(table.starts_with("property,value,limit,status\n"));
    assert!(table.lines().skip(1).all(|l| l.ends_with(",PASS")));

    let o = r.exec("check", &format!(r#"{DESK_COST}, "grid": {{"nx": 21, "ntheta": 201}}, "check": {{"perturb_layer": 1e-4}}"#));
    assert_eq!(code(&o), 1);
    let failing: Vec<String> = r.read("check.csv").lines().filter(|l| l.ends_with(",FAIL")).map(String::from).collect();
    assert!(failing.iter().any(|l| l.starts_with("layer ODE residual")), "{failing:?}");
    assert!(stdout(&o).contains("FAIL"));

    assert_eq!(code(&r.exec("check", r#""cost": {"gamma_lin": 0.0, "eta": 1e-5}"#)), 2);
}

#[test]
fn validate_reports_three_forms() {
    let r = Run::new();
    let o = r.exec("validate", r#""cost": {"gamma_lin": 2e-4}, "validity": {"gamma_coeff": 0.1, "phi": 1e-3, "daily_volume": 1e7}"#);
    assert_eq!(code(&o), 0);
    let csv = r.read("validity.csv");
    let forms: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(forms, ["lambda form", "risk form", "dimensionless"]);
    assert_eq!(code(&r.exec("validate", r#""cost": {"gamma_lin": 2e-4}"#)), 2);
}

#[test]
fn quiet_suppresses_stdout() {
    let r = Run::new();
    let cfg = r.dir.path().join("c.json");
    fs::write(&cfg, format!("{{{MODEL}, {DESK_COST}, \"grid\": {{\"nx\": 9}}}}")).unwrap();
    let o = r.exec_path("band", &cfg, &["--quiet"]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let o = r.exec_path("band", &cfg, &[]);
    assert!(stdout(&o).contains("resolved nodes"));
}
