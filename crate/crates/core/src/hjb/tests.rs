use super::*;
use crate::model::linspace;
use std::sync::OnceLock;

fn desk_x(n: usize) -> Vec<f64> {
    let p = ModelParams::desk();
    let (a, b) = p.default_x_domain(6.0);
    linspace(a, b, n)
}

fn desk_theta_range() -> (f64, f64) {
    let p = ModelParams::desk();
    let m = 4.0 * p.omega * p.default_x_domain(6.0).1 / (2.0 * p.lambda);
    (-m, m)
}

fn solve(gamma: f64, eta: f64, nx: usize, cfg: &SolverConfig) -> Result<ValueGrid> {
    let p = ModelParams::desk();
    solve_hjb(&p, &CostParams::quadratic(gamma, eta)?, &desk_x(nx), desk_theta_range(), 201, cfg)
}

fn desk() -> &'static ValueGrid {
    static G: OnceLock<ValueGrid> = OnceLock::new();
    G.get_or_init(|| solve(1e-4, 1e-5, 21, &SolverConfig::default()).unwrap())
}

/// Local ξ-spacing at θ in column i.
fn cell_at(vg: &ValueGrid, i: usize, theta: f64) -> f64 {
    let xi = theta - vg.mesh.shear * vg.mesh.x[i];
    let j = vg.mesh.xi.partition_point(|&z| z < xi).clamp(1, vg.mesh.nxi() - 1);
    vg.mesh.xi[j] - vg.mesh.xi[j - 1]
}

#[test]
fn optimal_control_closed_form() {
    let (g, eta) = (1e-4, 1e-5);
    assert_eq!(optimal_control(0.5 * g, -0.5 * g, g, eta), 0.0);
    assert!((optimal_control(g + 2.0 * eta * 3.0, 0.0, g, eta) - 3.0).abs() < 1e-9);
    assert!((optimal_control(0.0, -g - 2.0 * eta * 2.0, g, eta) + 2.0).abs() < 1e-9);
}

#[test]
fn desk_band_inside_domain_and_converged() {
    let vg = desk();
    assert!(vg.band.valid.iter().all(|&v| v));
    let (lo, hi) = desk_theta_range();
    for i in 0..vg.mesh.nx() {
        assert!(vg.band.theta_plus[i] < hi && -vg.band.theta_minus[i] > lo);
        assert!(vg.band.width(i) > 0.0);
    }
    assert!(vg.residual <= 10.0 * SolverConfig::default().convergence_tol);
}

#[test]
fn nt_region_slope_bounded_by_gamma() {
    let vg = desk();
    let g = vg.costs.gamma_lin;
    for i in 0..vg.mesh.nx() {
        let vmax = (0..vg.mesh.nxi()).map(|j| vg.velocity_at(i, j).abs()).fold(0.0, f64::max);
        for j in 1..vg.mesh.nxi() - 1 {
            if vg.velocity_at(i, j).abs() < vg.threshold * vmax {
                let d = (vg.v_at(i, j + 1) - vg.v_at(i, j - 1)) / (vg.mesh.xi[j + 1] - vg.mesh.xi[j - 1]);
                assert!(d.abs() <= g * (1.0 + 1e-3), "x {} theta {} V_theta {d:e}", vg.mesh.x[i], vg.theta(i, j));
            }
        }
    }
}

#[test]
fn velocity_antisymmetric() {
    let vg = desk();
    let (nx, nxi) = (vg.mesh.nx(), vg.mesh.nxi());
    let vmax = vg.velocity.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..nx {
        for j in 0..nxi {
            let a = vg.velocity_at(i, j);
            let b = vg.velocity_at(nx - 1 - i, nxi - 1 - j);
            assert!((a + b).abs() <= 1e-4 * vmax, "({i},{j}) {a} {b}");
        }
    }
    for i in 0..nx {
        let c = cell_at(vg, i, vg.band.theta_plus[i]);
        assert!((vg.band.theta_plus[i] - vg.band.theta_minus[nx - 1 - i]).abs() <= c);
    }
}

#[test]
fn huge_gamma_never_trades() {
    // |V_θ| of the hold value reaches 2λθ/ρ ≈ 110 at the θ-edge
    let vg = solve(1e3, 1e-5, 11, &SolverConfig::default()).unwrap();
    assert!(vg.velocity.iter().all(|&v| v == 0.0));
    assert!(vg.band.valid.iter().all(|&v| !v));
}

#[test]
fn band_monotone_in_costs() {
    let cfg = SolverConfig::default();
    let w = |g: f64, eta: f64| {
        let vg = solve(g, eta, 11, &cfg).unwrap();
        vg.band.width(5)
    };
    let wg: Vec<f64> = [5e-5, 1e-4, 2e-4].iter().map(|&g| w(g, 1e-5)).collect();
    assert!(wg[0] <= wg[1] && wg[1] <= wg[2], "{wg:?}");
    let we: Vec<f64> = [1e-6, 1e-5, 1e-4].iter().map(|&e| w(1e-4, e)).collect();
    assert!(we[0] >= we[1] && we[1] >= we[2], "{we:?}");
}

#[test]
fn threshold_invariance() {
    let vg = desk();
    let a = extract_band(vg, 1e-6);
    let b = extract_band(vg, 1e-5);
    for i in 0..vg.mesh.nx() {
        let c = cell_at(vg, i, a.theta_plus[i]);
        assert!((a.theta_plus[i] - b.theta_plus[i]).abs() < c, "x {} moved {:e} cell {c:e}", vg.mesh.x[i], (a.theta_plus[i] - b.theta_plus[i]).abs());
    }
}

#[test]
fn band_stable_under_refinement() {
    let w = crate::ms::half_width_estimate(&ModelParams::desk(), 1e-4);
    let coarse = SolverConfig { fine_step: Some(4e-3 * w), ..Default::default() };
    let fine = SolverConfig { fine_step: Some(2e-3 * w), ..Default::default() };
    let a = solve(1e-4, 1e-5, 11, &coarse).unwrap();
    let b = solve(1e-4, 1e-5, 11, &fine).unwrap();
    for i in 0..11 {
        let d = (a.band.theta_plus[i] - b.band.theta_plus[i]).abs();
        assert!(d <= 2.0 * a.mesh.fine_step, "x {} {d:e}", a.mesh.x[i]);
    }
}

#[test]
fn matches_zero_eta_band_on_uniform_mesh() {
    let p = ModelParams::desk();
    let cfg = SolverConfig { mesh: MeshKind::Uniform, ..Default::default() };
    let vg = solve_hjb(&p, &CostParams::quadratic(1e-4, 1e-8).unwrap(), &desk_x(21), desk_theta_range(), 1001, &cfg).unwrap();
    let r = vg.mesh.reference.as_ref().unwrap();
    let h = vg.mesh.fine_step;
    for i in 0..21 {
        assert!(vg.band.valid[i] && r.valid[i]);
        assert!((vg.band.theta_plus[i] - r.theta_plus[i]).abs() <= 2.0 * h);
        assert!((vg.band.theta_minus[i] - r.theta_minus[i]).abs() <= 2.0 * h);
    }
}

#[test]
fn explicit_agrees_with_policy_iteration() {
    // strong discounting keeps the explicit relaxation short
    let p = ModelParams { rho: 0.5, ..ModelParams::desk() };
    let c = CostParams::quadratic(1e-4, 1e-3).unwrap();
    let x = desk_x(9);
    let base = SolverConfig { mesh: MeshKind::Uniform, max_iters: 2_000_000, convergence_tol: 1e-14, ..Default::default() };
    let a = solve_hjb(&p, &c, &x, desk_theta_range(), 41, &base).unwrap();
    let b = solve_hjb(&p, &c, &x, desk_theta_range(), 41, &SolverConfig { scheme: Scheme::Explicit, ..base }).unwrap();
    let scale = a.value.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = a.value.iter().zip(&b.value).fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
    assert!(diff <= 1e-6 * scale, "{diff:e} vs {scale:e}");
}

#[test]
fn iteration_cap_reports_non_convergence() {
    let cfg = SolverConfig { max_iters: 1, ..Default::default() };
    assert!(matches!(solve(1e-4, 1e-5, 11, &cfg), Err(Error::NonConvergence { iterations: 1, .. })));
}

#[test]
fn input_errors() {
    let cfg = SolverConfig::default();
    assert!(matches!(solve(1e-4, 1e-13, 11, &cfg), Err(Error::Config(_))));
    let p = ModelParams { omega: 0.0, ..ModelParams::desk() };
    let e = solve_hjb(&p, &CostParams::quadratic(1e-4, 1e-5).unwrap(), &desk_x(11), desk_theta_range(), 201, &cfg);
    assert!(matches!(e, Err(Error::Regime(_)) | Err(Error::Config(_))));
    let c = CostParams::three_halves(1e-4, 1e-5).unwrap();
    let e = solve_hjb(&ModelParams::desk(), &c, &desk_x(11), desk_theta_range(), 201, &cfg);
    assert!(matches!(e, Err(Error::Config(_))));
    assert!(SolverConfig { pseudo_time_step: 1.5, ..cfg }.validate().is_err());
}

#[test]
fn slice_zero_in_band_and_monotone_outside() {
    let vg = desk();
    let s = velocity_slice(vg, 0.0).unwrap();
    let i = vg.mesh.x.iter().position(|&x| x.abs() < 1e-12).unwrap();
    let (tp, tm) = (vg.band.theta_plus[i], vg.band.theta_minus[i]);
    let vmax = s.v.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (t, v) in s.theta.iter().zip(&s.v) {
        if *t < tp && *t > -tm {
            assert!(v.abs() < vg.threshold * vmax);
        }
    }
    let outside: Vec<f64> = s.theta.iter().zip(&s.v).filter(|(t, _)| **t > tp).map(|(_, v)| *v).collect();
    assert!(outside.windows(2).all(|w| w[1] <= w[0]));
    assert!(velocity_slice(vg, 1.0).is_err());
}

#[test]
fn continuity_trivial_without_boundary() {
    let p = ModelParams::desk();
    let c = CostParams::quadratic(1e3, 1e-5).unwrap();
    let x = desk_x(11);
    let a = solve_hjb(&p, &c, &x, desk_theta_range(), 41, &SolverConfig::default()).unwrap();
    let b = solve_hjb(&p, &c, &x, desk_theta_range(), 81, &SolverConfig::default()).unwrap();
    let r = c2_continuity_check(&a, &b).unwrap();
    assert!(r.pass);
    assert_eq!(r.max_second.0, 0.0);
}
