//! Boundary determination for the pure linear-cost band.
//!
//! For a fixed position θ the no-trade interval in x is [h₋(θ), h₊(θ)]. On it
//! U = ∂V/∂θ solves (σ²/2)U'' + μU' − ρU = 2λθ − μ with U = ±Γ at the ends.
//! The ends are fixed by U_x = 0 there, which is the same as ∂²V/∂θ² = 0.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::special::{find_root, RootBracket};

use super::pair::MsComponents;

/// No-trade band sampled on x-nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub x_nodes: Vec<f64>,
    /// Upper boundary Θ⁺(x).
    pub theta_plus: Vec<f64>,
    /// Lower boundary is −Θ⁻(x).
    pub theta_minus: Vec<f64>,
    pub theta_plus_deriv: Vec<f64>,
    pub theta_minus_deriv: Vec<f64>,
    /// Nodes where both boundaries were resolved.
    pub valid: Vec<bool>,
    pub gamma_lin: f64,
}

impl Band {
    pub fn len(&self) -> usize {
        self.x_nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_nodes.is_empty()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.theta_plus[i] + self.theta_minus[i]
    }

    /// Linear interpolation of Θ⁺ over valid nodes.
    pub fn theta_plus_at(&self, x: f64) -> Option<f64> {
        interp_valid(&self.x_nodes, &self.theta_plus, &self.valid, x)
    }

    pub fn theta_minus_at(&self, x: f64) -> Option<f64> {
        interp_valid(&self.x_nodes, &self.theta_minus, &self.valid, x)
    }
}

fn interp_valid(xs: &[f64], ys: &[f64], ok: &[bool], x: f64) -> Option<f64> {
    let i = xs.windows(2).position(|w| w[0] <= x && x <= w[1])?;
    if !(ok[i] && ok[i + 1]) {
        return None;
    }
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    Some(ys[i] + t * (ys[i + 1] - ys[i]))
}

/// Leading-order half-width of the band for small Γ: (3ΓΩ²σ²/16λ³)^{1/3}.
pub fn half_width_estimate(p: &ModelParams, gamma_lin: f64) -> f64 {
    (3.0 * gamma_lin * p.omega * p.omega * p.sigma * p.sigma / (16.0 * p.lambda.powi(3))).cbrt()
}

/// (α₁', α₂') such that I + α₁'ψ₁ + α₂'ψ₂ equals +Γ at h₋ and −Γ at h₊.
pub fn alpha_coefficients(comp: &MsComponents, h_plus: f64, h_minus: f64, gamma_lin: f64, theta: f64) -> Result<(f64, f64)> {
    if !(h_plus > h_minus) {
        return Err(Error::Degenerate(format!("h_plus {h_plus} must exceed h_minus {h_minus}")));
    }
    let pair = comp.pair();
    let (p1p, p1m) = (pair.psi1(h_plus).0, pair.psi1(h_minus).0);
    let (p2p, p2m) = (pair.psi2(h_plus).0, pair.psi2(h_minus).0);
    let d = p1p * p2m - p1m * p2p;
    if d.abs() <= 1e-13 * (p1p * p2m).abs().max((p1m * p2p).abs()) {
        return Err(Error::Degenerate(format!("determinant {d:e} vanishes for h = ({h_minus}, {h_plus})")));
    }
    let g = gamma_lin;
    let ip = comp.particular(h_plus, theta).0;
    let im = comp.particular(h_minus, theta).0;
    let a1 = (-g * p2m - g * p2p + im * p2p - ip * p2m) / d;
    let a2 = (g * p1m + g * p1p + ip * p1m - im * p1p) / d;
    Ok((a1, a2))
}

/// U = ∂V/∂θ on the line θ, given the NT coefficients.
pub fn slope_with(comp: &MsComponents, alpha: (f64, f64), x: f64, theta: f64) -> (f64, f64) {
    let (i, di) = comp.particular(x, theta);
    let (p1, d1) = comp.pair().psi1(x);
    let (p2, d2) = comp.pair().psi2(x);
    (i + alpha.0 * p1 + alpha.1 * p2, di + alpha.0 * d1 + alpha.1 * d2)
}

/// Solution of the initial value problem U(h₋) = Γ, U'(h₋) = 0, returned as coefficients.
fn ivp_coefficients(comp: &MsComponents, gamma_lin: f64, theta: f64, hm: f64) -> (f64, f64) {
    let (i, di) = comp.particular(hm, theta);
    let (p1, d1) = comp.pair().psi1(hm);
    let (p2, d2) = comp.pair().psi2(hm);
    let w = p1 * d2 - p2 * d1;
    let r = gamma_lin - i;
    ((r * d2 + di * p2) / w, (-p1 * di - d1 * r) / w)
}

const SCAN: usize = 24;

/// First local minimum of the IVP solution after h₋ and the value there
/// (or the first point where it falls below −4Γ).
fn first_minimum(comp: &MsComponents, gamma_lin: f64, theta: f64, hm: f64, scale: f64) -> Result<(f64, f64)> {
    let c = ivp_coefficients(comp, gamma_lin, theta, hm);
    let du = |x: f64| slope_with(comp, c, x, theta).1;
    let x_end = comp.pair().domain().1;
    let step = scale / SCAN as f64;
    let mut lo = hm;
    let mut k = 1;
    loop {
        let hi = hm + step * k as f64;
        if hi >= x_end {
            return Err(Error::Regime(format!("no-trade interval for theta = {theta:e} leaves the x-domain")));
        }
        if du(hi) >= 0.0 {
            let x1 = find_root(du, RootBracket::new(lo, hi, 1e-17)?)?;
            return Ok((x1, slope_with(comp, c, x1, theta).0));
        }
        // Shooting into the growing solution can run away without turning;
        // far below −Γ only the sign of U + Γ matters to the caller.
        let u = slope_with(comp, c, hi, theta).0;
        if u < -4.0 * gamma_lin {
            return Ok((hi, u));
        }
        lo = hi;
        k += 1;
    }
}

/// Boundary abscissas (h₋, h₊) of the no-trade interval on the line θ.
pub fn nt_boundaries(comp: &MsComponents, gamma_lin: f64, theta: f64) -> Result<(f64, f64)> {
    let p = comp.params();
    if p.omega <= 0.0 {
        return Err(Error::Regime("band abscissas need a mean-reverting signal (omega > 0)".into()));
    }
    if !(gamma_lin > 0.0) {
        return Err(Error::Config(format!("gamma_lin must be > 0, got {gamma_lin}")));
    }
    let (x_lo, _) = comp.pair().domain();
    // U'' < 0 at h₋ requires h₋ below this point.
    let xc = -(2.0 * p.lambda * theta + p.rho * gamma_lin) / p.omega;
    let w = half_width_estimate(p, gamma_lin);
    let mut ell = w * p.lambda / p.omega / 8.0;
    let g = |hm: f64, ell: f64| -> Result<f64> {
        let (_, umin) = first_minimum(comp, gamma_lin, theta, hm, ell)?;
        Ok(umin + gamma_lin)
    };
    let mut prev = xc - 1e-6 * ell;
    let mut prev_ell = 1e-6 * ell;
    loop {
        let hm = xc - ell;
        if hm <= x_lo {
            return Err(Error::Regime(format!("no-trade interval for theta = {theta:e} leaves the x-domain")));
        }
        if g(hm, ell)? < 0.0 {
            let f = |h: f64| g(h, (xc - h).max(prev_ell)).unwrap_or(f64::NAN);
            let hm = find_root(f, RootBracket::new(hm, prev, 1e-17)?)?;
            let (hp, _) = first_minimum(comp, gamma_lin, theta, hm, xc - hm)?;
            return Ok((hm, hp));
        }
        prev = hm;
        prev_ell = ell;
        ell *= 2.0;
    }
}

/// Solves the monotone relation `f(θ) = target` for θ, starting at `theta0`
/// and stepping by `dir` until the root is bracketed.
fn invert(f: impl Fn(f64) -> Result<f64>, target: f64, theta0: f64, step: f64, dir: f64) -> Result<f64> {
    // f is decreasing in θ for both boundary maps.
    let s = |t: f64| f(t).map(|v| v - target);
    let mut a = theta0;
    let mut fa = s(a)?;
    if fa * dir < 0.0 {
        return Err(Error::Regime(format!("starting point {theta0:e} is already past the boundary")));
    }
    let mut h = step;
    for _ in 0..60 {
        let b = a + dir * h;
        let fb = s(b)?;
        if fb * fa <= 0.0 {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let tol = 1e-15 * step.max(lo.abs());
            return find_root(|t| s(t).unwrap_or(f64::NAN), RootBracket::new(lo, hi, tol)?);
        }
        a = b;
        fa = fb;
        h *= 2.0;
    }
    Err(Error::Regime("could not bracket the band boundary".into()))
}

/// Θ⁺(x): the θ whose no-trade interval ends at x on the right.
pub fn theta_plus_at(comp: &MsComponents, gamma_lin: f64, x: f64) -> Result<f64> {
    let p = comp.params();
    let w = half_width_estimate(p, gamma_lin);
    let start = -p.omega * x / (2.0 * p.lambda) - 0.5 * w;
    invert(|t| nt_boundaries(comp, gamma_lin, t).map(|h| h.1), x, start, 0.5 * w, 1.0)
}

/// Θ⁻(x): minus the θ whose no-trade interval starts at x on the left.
pub fn theta_minus_at(comp: &MsComponents, gamma_lin: f64, x: f64) -> Result<f64> {
    let p = comp.params();
    let w = half_width_estimate(p, gamma_lin);
    let start = -p.omega * x / (2.0 * p.lambda) + 0.5 * w;
    invert(|t| nt_boundaries(comp, gamma_lin, t).map(|h| h.0), x, start, 0.5 * w, -1.0).map(|t| -t)
}

/// dh/dθ of a boundary map by a five-point central difference.
fn boundary_map_derivative(comp: &MsComponents, gamma_lin: f64, theta: f64, upper: bool) -> Result<f64> {
    let d = 1e-2 * half_width_estimate(comp.params(), gamma_lin);
    let h = |t: f64| nt_boundaries(comp, gamma_lin, t).map(|b| if upper { b.1 } else { b.0 });
    Ok((h(theta - 2.0 * d)? - 8.0 * h(theta - d)? + 8.0 * h(theta + d)? - h(theta + 2.0 * d)?) / (12.0 * d))
}

/// dΘ⁺/dx at x.
pub fn theta_plus_deriv_at(comp: &MsComponents, gamma_lin: f64, x: f64, theta_plus: f64) -> Result<f64> {
    let _ = x;
    Ok(1.0 / boundary_map_derivative(comp, gamma_lin, theta_plus, true)?)
}

/// dΘ⁻/dx at x (Θ⁻ = −θ along the left boundary map).
pub fn theta_minus_deriv_at(comp: &MsComponents, gamma_lin: f64, x: f64, theta_minus: f64) -> Result<f64> {
    let _ = x;
    Ok(-1.0 / boundary_map_derivative(comp, gamma_lin, -theta_minus, false)?)
}

/// Band on the given x-nodes. Nodes are solved independently and in parallel.
pub fn find_band_zero(comp: &MsComponents, gamma_lin: f64, x_nodes: &[f64]) -> Result<Band> {
    let p = comp.params();
    if !(gamma_lin > 0.0) {
        return Err(Error::Config(format!("gamma_lin must be > 0, got {gamma_lin}")));
    }
    if p.omega == 0.0 {
        // Without mean reversion nothing depends on x and the band is flat.
        let t = p.rho * gamma_lin / (2.0 * p.lambda);
        let n = x_nodes.len();
        return Ok(Band {
            x_nodes: x_nodes.to_vec(),
            theta_plus: vec![t; n],
            theta_minus: vec![t; n],
            theta_plus_deriv: vec![0.0; n],
            theta_minus_deriv: vec![0.0; n],
            valid: vec![true; n],
            gamma_lin,
        });
    }
    let rows: Vec<Result<(f64, f64, f64, f64)>> = x_nodes
        .par_iter()
        .map(|&x| -> Result<(f64, f64, f64, f64)> {
            let tp = theta_plus_at(comp, gamma_lin, x)?;
            let tm = theta_minus_at(comp, gamma_lin, x)?;
            let dp = theta_plus_deriv_at(comp, gamma_lin, x, tp)?;
            let dm = theta_minus_deriv_at(comp, gamma_lin, x, tm)?;
            Ok((tp, tm, dp, dm))
        })
        .collect();
    // Nodes whose interval leaves the domain are masked; fail only if none is left.
    if rows.iter().all(|r| r.is_err()) {
        if let Some(Err(e)) = rows.into_iter().next() {
            return Err(e);
        }
        return Err(Error::Config("no x-nodes given".into()));
    }
    let get = |k: usize| -> Vec<f64> {
        rows.iter()
            .map(|r| r.as_ref().map(|t| [t.0, t.1, t.2, t.3][k]).unwrap_or(f64::NAN))
            .collect()
    };
    Ok(Band {
        x_nodes: x_nodes.to_vec(),
        theta_plus: get(0),
        theta_minus: get(1),
        theta_plus_deriv: get(2),
        theta_minus_deriv: get(3),
        valid: rows.iter().map(|r| r.is_ok()).collect(),
        gamma_lin,
    })
}
