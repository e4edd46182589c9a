//! Value function inside the band and the boundary diagnostics.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::drift;

use super::band::{alpha_coefficients, half_width_estimate, nt_boundaries, slope_with, theta_minus_at, theta_plus_at, theta_plus_deriv_at, Band};
use super::pair::MsComponents;

/// (α₁'(θ), α₂'(θ)) on the band-consistent boundaries of line θ.
pub fn alpha_prime(comp: &MsComponents, gamma_lin: f64, theta: f64) -> Result<(f64, f64)> {
    let (hm, hp) = nt_boundaries(comp, gamma_lin, theta)?;
    alpha_coefficients(comp, hp, hm, gamma_lin, theta)
}

/// ∂V/∂θ at (x, θ), continued analytically in θ from the no-trade solution.
pub fn nt_slope(comp: &MsComponents, gamma_lin: f64, x: f64, theta: f64) -> Result<f64> {
    let a = alpha_prime(comp, gamma_lin, theta)?;
    Ok(slope_with(comp, a, x, theta).0)
}

/// ∂²V/∂θ² at the upper boundary through x (Richardson-extrapolated central difference).
pub fn second_derivative_at_band(comp: &MsComponents, gamma_lin: f64, x: f64) -> Result<f64> {
    let t0 = theta_plus_at(comp, gamma_lin, x)?;
    let d = 1e-2 * half_width_estimate(comp.params(), gamma_lin);
    let u = |t: f64| nt_slope(comp, gamma_lin, x, t);
    let c1 = (u(t0 + d)? - u(t0 - d)?) / (2.0 * d);
    let c2 = (u(t0 + 2.0 * d)? - u(t0 - 2.0 * d)?) / (4.0 * d);
    Ok((4.0 * c1 - c2) / 3.0)
}

/// ∂³V/∂θ³ at θ = Θ⁺(x) from the θ-curvature of the α' coefficients
/// (fourth-order differences). Fails if the result is not positive.
pub fn third_derivative_at_band(comp: &MsComponents, band: &Band, x: f64) -> Result<f64> {
    let g = band.gamma_lin;
    let t0 = theta_plus_at(comp, g, x)?;
    let d = 0.05 * half_width_estimate(comp.params(), g);
    let (p1, p2) = (comp.pair().psi1(x).0, comp.pair().psi2(x).0);
    let u = |k: f64| -> Result<f64> {
        let (a1, a2) = alpha_prime(comp, g, t0 + k * d)?;
        Ok(a1 * p1 + a2 * p2)
    };
    let v3 = (-u(-2.0)? + 16.0 * u(-1.0)? - 30.0 * u(0.0)? + 16.0 * u(1.0)? - u(2.0)?) / (12.0 * d * d);
    if !(v3 > 0.0) {
        return Err(Error::Regime(format!("third derivative {v3:e} at x = {x} is not positive")));
    }
    Ok(v3)
}

/// Closed form 2(2λΘ⁺ − μ − ρΓ)/(σ²Θ⁺'²), which follows from differentiating
/// the two boundary conditions along the boundary curve.
pub fn third_derivative_closed_form(comp: &MsComponents, gamma_lin: f64, x: f64) -> Result<f64> {
    let p = comp.params();
    let t0 = theta_plus_at(comp, gamma_lin, x)?;
    let dt = theta_plus_deriv_at(comp, gamma_lin, x, t0)?;
    Ok(2.0 * (2.0 * p.lambda * t0 - drift(p, x) - p.rho * gamma_lin) / (p.sigma * p.sigma * dt * dt))
}

/// Change of ∂V/∂θ at (x, Θ⁺(x)) when the upper boundary is displaced by δ in θ
/// (h₊ moved by −δ/Θ⁺', h₋ held fixed, value condition re-imposed).
pub fn boundary_shift_response(comp: &MsComponents, gamma_lin: f64, x: f64, delta: f64) -> Result<f64> {
    let t0 = theta_plus_at(comp, gamma_lin, x)?;
    let dt = theta_plus_deriv_at(comp, gamma_lin, x, t0)?;
    let (hm, _) = nt_boundaries(comp, gamma_lin, t0)?;
    let a = alpha_coefficients(comp, x - delta / dt, hm, gamma_lin, t0)?;
    Ok(slope_with(comp, a, x, t0).0 + gamma_lin)
}

/// Result of the boundary-displacement consistency check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GPrimeCheck {
    /// Second difference of the re-solved slope over displacements ±δ.
    pub lhs: f64,
    /// −∂³V/∂θ³ at the boundary.
    pub rhs: f64,
    /// Same second difference with δ/2.
    pub lhs_half: f64,
}

impl GPrimeCheck {
    pub fn relative_gap(&self) -> f64 {
        ((self.lhs - self.rhs) / self.rhs).abs()
    }
}

pub fn check_gprime_identity(comp: &MsComponents, band: &Band, x: f64, delta: f64) -> Result<GPrimeCheck> {
    let g = band.gamma_lin;
    let second = |d: f64| -> Result<f64> {
        Ok((boundary_shift_response(comp, g, x, d)? + boundary_shift_response(comp, g, x, -d)?) / (d * d))
    };
    let lhs = second(delta)?;
    let lhs_half = second(0.5 * delta)?;
    if (lhs - lhs_half).abs() > 0.1 * lhs_half.abs() {
        return Err(Error::Resolution(format!(
            "displacement {delta:e} is outside the quadratic regime ({lhs:e} vs {lhs_half:e} at half step)"
        )));
    }
    let rhs = -third_derivative_at_band(comp, band, x)?;
    Ok(GPrimeCheck { lhs, rhs, lhs_half })
}

/// Tabulated integration constants of the no-trade value,
/// V = P(x,θ) + β₁(θ)ψ₁(x) + β₂(θ)ψ₂(x), with β' = α'.
#[derive(Debug, Clone)]
pub struct NtValue<'a> {
    comp: &'a MsComponents,
    gamma_lin: f64,
    thetas: Vec<f64>,
    beta1: Vec<f64>,
    beta2: Vec<f64>,
    /// Largest difference between the Richardson partners of the trapezoid sums.
    pub quadrature_gap: f64,
}

impl<'a> NtValue<'a> {
    /// β₁ vanishes at the lowest θ (boundaries at the right of the domain)
    /// and β₂ at the highest, where the matching ψ dominates.
    pub fn build(comp: &'a MsComponents, gamma_lin: f64, n_intervals: usize) -> Result<Self> {
        let (x0, x1) = comp.pair().domain();
        let margin = 0.15 * (x1 - x0);
        let t_lo = theta_plus_at(comp, gamma_lin, x1 - margin)?;
        let t_hi = -theta_minus_at(comp, gamma_lin, x0 + margin)?;
        let n = 2 * n_intervals.max(8);
        let fine: Vec<f64> = (0..=n).map(|i| t_lo + (t_hi - t_lo) * i as f64 / n as f64).collect();
        let alphas: Vec<(f64, f64)> = fine.par_iter().map(|&t| alpha_prime(comp, gamma_lin, t)).collect::<Result<_>>()?;
        let h = fine[1] - fine[0];
        let cum = |vals: &[f64], step: usize| -> Vec<f64> {
            let hh = h * step as f64;
            let mut out = vec![0.0];
            let mut acc = 0.0;
            let mut i = 0;
            while i + step <= n {
                acc += 0.5 * hh * (vals[i] + vals[i + step]);
                out.push(acc);
                i += step;
            }
            out
        };
        let a1: Vec<f64> = alphas.iter().map(|a| a.0).collect();
        let a2: Vec<f64> = alphas.iter().map(|a| a.1).collect();
        let mut gap: f64 = 0.0;
        let mut rich = |vals: &[f64]| -> Vec<f64> {
            let f = cum(vals, 1);
            let c = cum(vals, 2);
            c.iter()
                .enumerate()
                .map(|(k, &cv)| {
                    let fv = f[2 * k];
                    gap = gap.max((fv - cv).abs());
                    (4.0 * fv - cv) / 3.0
                })
                .collect()
        };
        let b1 = rich(&a1);
        let c2 = rich(&a2);
        let total2 = *c2.last().unwrap();
        let beta2: Vec<f64> = c2.iter().map(|v| v - total2).collect();
        let thetas: Vec<f64> = (0..b1.len()).map(|k| fine[2 * k]).collect();
        Ok(NtValue { comp, gamma_lin, thetas, beta1: b1, beta2, quadrature_gap: gap })
    }

    pub fn theta_range(&self) -> (f64, f64) {
        (self.thetas[0], *self.thetas.last().unwrap())
    }

    fn betas(&self, theta: f64) -> Result<(f64, f64)> {
        let (lo, hi) = self.theta_range();
        if theta < lo || theta > hi {
            return Err(Error::Domain(format!("theta {theta:e} outside the tabulated range [{lo:e}, {hi:e}]")));
        }
        let h = self.thetas[1] - self.thetas[0];
        let k = (((theta - lo) / h).round() as usize).min(self.thetas.len() - 1);
        let tk = self.thetas[k];
        let (mut b1, mut b2) = (self.beta1[k], self.beta2[k]);
        if theta != tk {
            // Simpson from the nearest node.
            let a = alpha_prime(self.comp, self.gamma_lin, tk)?;
            let m = alpha_prime(self.comp, self.gamma_lin, 0.5 * (tk + theta))?;
            let e = alpha_prime(self.comp, self.gamma_lin, theta)?;
            let s = (theta - tk) / 6.0;
            b1 += s * (a.0 + 4.0 * m.0 + e.0);
            b2 += s * (a.1 + 4.0 * m.1 + e.1);
        }
        Ok((b1, b2))
    }

    /// V inside the no-trade region.
    pub fn value_nt(&self, x: f64, theta: f64) -> Result<f64> {
        let (hm, hp) = nt_boundaries(self.comp, self.gamma_lin, theta)?;
        let tol = 1e-12 * (hp - hm);
        if x < hm - tol || x > hp + tol {
            return Err(Error::Domain(format!("(x, theta) = ({x}, {theta:e}) lies outside [{hm}, {hp}]")));
        }
        let (b1, b2) = self.betas(theta)?;
        let pair = self.comp.pair();
        Ok(self.comp.particular_value(x, theta) + b1 * pair.psi1(x).0 + b2 * pair.psi2(x).0)
    }

    /// V anywhere: outside the band the position is traded to the nearest boundary at cost Γ per unit.
    pub fn value(&self, x: f64, theta: f64) -> Result<f64> {
        let up = theta_plus_at(self.comp, self.gamma_lin, x)?;
        let dn = -theta_minus_at(self.comp, self.gamma_lin, x)?;
        if theta > up {
            Ok(self.value_nt(x, up)? - self.gamma_lin * (theta - up))
        } else if theta < dn {
            Ok(self.value_nt(x, dn)? - self.gamma_lin * (dn - theta))
        } else {
            self.value_nt(x, theta)
        }
    }
}

/// Convenience wrapper matching the band-level interface.
pub fn value_nt_zero(table: &NtValue<'_>, band: &Band, x: f64, theta: f64) -> Result<f64> {
    if (band.gamma_lin - table.gamma_lin).abs() > 0.0 {
        return Err(Error::Config("band and value table were built for different gamma_lin".into()));
    }
    table.value_nt(x, theta)
}
