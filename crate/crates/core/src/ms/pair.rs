//! Homogeneous solutions of the resolvent equation and the Green's-function particular solution.

use crate::error::{Error, Result};
use crate::interp::HermiteTable;
use crate::model::{drift, ModelParams};
use crate::special::{integrate_ode_at, OdeOptions};

const LATTICE: usize = 4001;

/// Gauss–Legendre nodes and weights on [-1, 1], 8 points.
const GL_X: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
const GL_W: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];

/// Two independent solutions of (σ²/2)ψ'' + μ(x)ψ' − ρψ = 0.
///
/// ψ₁ is the solution that decays towards the left edge of the domain,
/// ψ₂ the one that decays towards the right edge.
#[derive(Debug, Clone)]
pub struct HomogeneousPair {
    params: ModelParams,
    psi1: HermiteTable,
    psi2: HermiteTable,
}

impl HomogeneousPair {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.psi1.x_min(), self.psi1.x_max())
    }

    /// (ψ₁, ψ₁') at x.
    pub fn psi1(&self, x: f64) -> (f64, f64) {
        self.psi1.eval(x)
    }

    /// (ψ₂, ψ₂') at x.
    pub fn psi2(&self, x: f64) -> (f64, f64) {
        self.psi2.eval(x)
    }

    /// W = ψ₁ψ₂' − ψ₂ψ₁'.
    pub fn wronskian(&self, x: f64) -> f64 {
        let (a, da) = self.psi1(x);
        let (b, db) = self.psi2(x);
        a * db - b * da
    }
}

/// Logarithmic slope ψ'/ψ of the slowly varying solution at `x`, from the
/// quasi-static Riccati balance (σ²/2)r² + μr − ρ = 0. `decay_left` picks the
/// root belonging to the solution that decays towards −∞.
fn edge_slope(p: &ModelParams, x: f64, decay_left: bool) -> f64 {
    let s2 = p.sigma * p.sigma;
    let m = drift(p, x);
    let disc = (m * m + 2.0 * s2 * p.rho).sqrt();
    if decay_left {
        (-m + disc) / s2
    } else {
        (-m - disc) / s2
    }
}

fn integrate_branch(p: &ModelParams, x0: f64, xs: &[f64], slope: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let s2 = p.sigma * p.sigma;
    let pp = *p;
    let rhs = move |x: f64, y: &[f64], d: &mut [f64]| {
        d[0] = y[1];
        d[1] = 2.0 * (pp.rho * y[0] - drift(&pp, x) * y[1]) / s2;
    };
    let opts = OdeOptions { rtol: 1e-13, atol: 1e-15, ..OdeOptions::with_tol(1e-13) };
    let tr = integrate_ode_at(rhs, x0, &[1.0, slope], xs, opts)?;
    Ok((tr.y.iter().map(|v| v[0]).collect(), tr.y.iter().map(|v| v[1]).collect()))
}

/// Integrates ψ₁ forward from the left edge and ψ₂ backward from the right
/// edge, both from the slowly varying edge asymptote with unit value.
pub fn solve_homogeneous(params: &ModelParams, x_domain: (f64, f64)) -> Result<HomogeneousPair> {
    params.validate()?;
    let (a, b) = x_domain;
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Config(format!("invalid x-domain ({a}, {b})")));
    }
    let h = (b - a) / (LATTICE - 1) as f64;
    let xs: Vec<f64> = (0..LATTICE).map(|i| if i == LATTICE - 1 { b } else { a + h * i as f64 }).collect();
    let (f1, d1) = integrate_branch(params, a, &xs, edge_slope(params, a, true))?;
    let rev: Vec<f64> = xs.iter().rev().copied().collect();
    let (mut f2, mut d2) = integrate_branch(params, b, &rev, edge_slope(params, b, false))?;
    f2.reverse();
    d2.reverse();
    let s2 = params.sigma * params.sigma;
    let dd = |f: &[f64], d: &[f64]| -> Vec<f64> {
        xs.iter()
            .zip(f.iter().zip(d))
            .map(|(&x, (&v, &dv))| 2.0 * (params.rho * v - drift(params, x) * dv) / s2)
            .collect()
    };
    let c1 = dd(&f1, &d1);
    let c2 = dd(&f2, &d2);
    Ok(HomogeneousPair {
        params: *params,
        psi1: HermiteTable::new(a, h, f1, d1, c1),
        psi2: HermiteTable::new(a, h, f2, d2, c2),
    })
}

/// Cumulative Green's integrals for one source term s(ξ):
/// L(x) = ∫_{x_min}^{x} ψ₁ s /(aW), R(x) = ∫_{x}^{x_max} ψ₂ s /(aW), a = σ²/2.
#[derive(Debug, Clone)]
struct Cumulative {
    left: HermiteTable,
    right: HermiteTable,
}

/// Particular-solution machinery for the θ-derivative of the no-trade value.
#[derive(Debug, Clone)]
pub struct MsComponents {
    pair: HomogeneousPair,
    /// Source 1 (multiplies 2λθ).
    unit: Cumulative,
    /// Source −μ(ξ).
    signal: Cumulative,
}

impl MsComponents {
    pub fn pair(&self) -> &HomogeneousPair {
        &self.pair
    }

    pub fn params(&self) -> &ModelParams {
        &self.pair.params
    }

    /// Green's function of 𝓛 − ρ: (𝓛_x − ρ)𝒢(·, ξ) = δ(· − ξ), vanishing at both edges' decaying branches.
    pub fn greens(&self, x: f64, xi: f64) -> f64 {
        let a = 0.5 * self.params().sigma.powi(2);
        let (lo, hi) = if x <= xi { (x, xi) } else { (xi, x) };
        self.pair.psi1(lo).0 * self.pair.psi2(hi).0 / (a * self.pair.wronskian(xi))
    }

    fn apply(&self, c: &Cumulative, x: f64) -> (f64, f64) {
        let (p1, dp1) = self.pair.psi1(x);
        let (p2, dp2) = self.pair.psi2(x);
        let l = c.left.eval(x).0;
        let r = c.right.eval(x).0;
        (p2 * l + p1 * r, dp2 * l + dp1 * r)
    }

    /// 𝒢[1] and its x-derivative.
    pub fn resolvent_unit(&self, x: f64) -> (f64, f64) {
        self.apply(&self.unit, x)
    }

    /// 𝒢[−μ] and its x-derivative.
    pub fn resolvent_signal(&self, x: f64) -> (f64, f64) {
        self.apply(&self.signal, x)
    }

    /// I(x, θ) = 𝒢[2λθ − μ] and ∂I/∂x: the particular solution of the equation for ∂V/∂θ.
    pub fn particular(&self, x: f64, theta: f64) -> (f64, f64) {
        let (q0, dq0) = self.resolvent_unit(x);
        let (q1, dq1) = self.resolvent_signal(x);
        let k = 2.0 * self.params().lambda * theta;
        (q1 + k * q0, dq1 + k * dq0)
    }

    /// Particular solution of the value equation itself, θ𝒢[−μ] + λθ²𝒢[1].
    pub fn particular_value(&self, x: f64, theta: f64) -> f64 {
        let q0 = self.resolvent_unit(x).0;
        let q1 = self.resolvent_signal(x).0;
        theta * q1 + self.params().lambda * theta * theta * q0
    }

    /// D(h₊, h₋) = ψ₁(h₊)ψ₂(h₋) − ψ₁(h₋)ψ₂(h₊).
    pub fn det_d(&self, h_plus: f64, h_minus: f64) -> f64 {
        self.pair.psi1(h_plus).0 * self.pair.psi2(h_minus).0 - self.pair.psi1(h_minus).0 * self.pair.psi2(h_plus).0
    }
}

fn cumulative(pair: &HomogeneousPair, source: impl Fn(f64) -> (f64, f64)) -> Cumulative {
    let p = pair.params;
    let a = 0.5 * p.sigma * p.sigma;
    let n = pair.psi1.len();
    let (x0, x1) = pair.domain();
    let h = (x1 - x0) / (n - 1) as f64;
    // W'/W from Abel's identity.
    let wlog = |x: f64| -2.0 * drift(&p, x) / (p.sigma * p.sigma);
    let kernel = |x: f64, which: usize| -> f64 {
        let psi = if which == 1 { pair.psi1(x).0 } else { pair.psi2(x).0 };
        psi * source(x).0 / (a * pair.wronskian(x))
    };
    let cell = |i: usize, which: usize| -> f64 {
        let xm = x0 + h * (i as f64 + 0.5);
        let r = 0.5 * h;
        GL_X.iter().zip(GL_W).map(|(&t, w)| w * (kernel(xm - r * t, which) + kernel(xm + r * t, which))).sum::<f64>() * r
    };
    let mut left = vec![0.0; n];
    let mut right = vec![0.0; n];
    for i in 1..n {
        left[i] = left[i - 1] + cell(i - 1, 1);
    }
    for i in (0..n - 1).rev() {
        right[i] = right[i + 1] + cell(i, 2);
    }
    let mut ld = vec![0.0; n];
    let mut ldd = vec![0.0; n];
    let mut rd = vec![0.0; n];
    let mut rdd = vec![0.0; n];
    for i in 0..n {
        let (x, p1, dp1, _) = pair.psi1.node(i);
        let (_, p2, dp2, _) = pair.psi2.node(i);
        let w = p1 * dp2 - p2 * dp1;
        let (s, ds) = source(x);
        ld[i] = p1 * s / (a * w);
        ldd[i] = ((dp1 * s + p1 * ds) - p1 * s * wlog(x)) / (a * w);
        rd[i] = -p2 * s / (a * w);
        rdd[i] = -((dp2 * s + p2 * ds) - p2 * s * wlog(x)) / (a * w);
    }
    Cumulative {
        left: HermiteTable::new(x0, h, left, ld, ldd),
        right: HermiteTable::new(x0, h, right, rd, rdd),
    }
}

/// Builds the Green's-function particular solution for the pair's model.
pub fn greens_particular(pair: &HomogeneousPair) -> Result<MsComponents> {
    let p = pair.params;
    let unit = cumulative(pair, |_| (1.0, 0.0));
    let signal = cumulative(pair, move |x| (-drift(&p, x), p.omega));
    let comp = MsComponents { pair: pair.clone(), unit, signal };
    let (x0, x1) = pair.domain();
    let probe = comp.particular(0.5 * (x0 + x1), 1.0).0;
    if !probe.is_finite() {
        return Err(Error::NonConvergence { iterations: 0, residual: probe });
    }
    Ok(comp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk_pair() -> HomogeneousPair {
        let p = ModelParams::desk();
        solve_homogeneous(&p, p.default_x_domain(6.0)).unwrap()
    }

    #[test]
    fn wronskian_follows_abel() {
        let pair = desk_pair();
        let p = pair.params;
        let (a, b) = pair.domain();
        let w0 = pair.wronskian(0.0);
        assert!(w0 < 0.0);
        for k in 0..=100 {
            let x = a + (b - a) * k as f64 / 100.0;
            let scaled = pair.wronskian(x) * (-p.omega * x * x / (p.sigma * p.sigma)).exp();
            assert!(((scaled - w0) / w0).abs() < 1e-6, "x={x} {scaled} {w0}");
        }
    }

    #[test]
    fn solves_the_ode() {
        let pair = desk_pair();
        let p = pair.params;
        let h = 1e-4;
        for &x in &[-0.2, -0.05, 0.0, 0.03, 0.2] {
            for f in [|q: &HomogeneousPair, x| q.psi1(x), |q: &HomogeneousPair, x| q.psi2(x)] {
                let (v, dv) = f(&pair, x);
                let d2h = (f(&pair, x + h).1 - f(&pair, x - h).1) / (2.0 * h);
                let d2b = (f(&pair, x + 2.0 * h).1 - f(&pair, x - 2.0 * h).1) / (4.0 * h);
                let d2 = (4.0 * d2h - d2b) / 3.0;
                let res = 0.5 * p.sigma * p.sigma * d2 + drift(&p, x) * dv - p.rho * v;
                let scale = p.rho * v.abs() + (drift(&p, x) * dv).abs();
                assert!(res.abs() < 1e-6 * scale.max(1e-12), "x={x} res={res} scale={scale}");
            }
        }
    }

    #[test]
    fn mirror_symmetry() {
        let pair = desk_pair();
        let (a, b) = pair.domain();
        for k in 0..=50 {
            let x = a + (b - a) * k as f64 / 50.0;
            let l = pair.psi2(x).0;
            let r = pair.psi1(-x).0;
            assert!(((l - r) / r).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn flattens_as_rho_vanishes() {
        let spread = |rho: f64| {
            let p = ModelParams::new(0.02, 0.1, 1.0, rho).unwrap();
            let pair = solve_homogeneous(&p, p.default_x_domain(6.0)).unwrap();
            let s = p.stationary_std();
            let vals: Vec<f64> = (-10..=10).map(|k| {
                let x = 0.2 * s * k as f64;
                pair.psi1(x).0 + pair.psi2(x).0
            }).collect();
            let hi = vals.iter().cloned().fold(f64::MIN, f64::max);
            let lo = vals.iter().cloned().fold(f64::MAX, f64::min);
            (hi - lo) / hi
        };
        let (a, b, c) = (spread(1e-2), spread(1e-3), spread(1e-4));
        assert!(a > b && b > c, "{a} {b} {c}");
        assert!(c < 1e-2);
    }

    #[test]
    fn particular_solves_source_equation() {
        let pair = desk_pair();
        let comp = greens_particular(&pair).unwrap();
        let p = *comp.params();
        let h = 1e-4;
        let theta = 3e-3;
        for &x in &[-0.15, -0.04, 0.0, 0.02, 0.1] {
            let v = |x| comp.particular_value(x, theta);
            let d1 = (v(x + h) - v(x - h)) / (2.0 * h);
            let d2 = (v(x + h) - 2.0 * v(x) + v(x - h)) / (h * h);
            let d1b = (v(x + 2.0 * h) - v(x - 2.0 * h)) / (4.0 * h);
            let d2b = (v(x + 2.0 * h) - 2.0 * v(x) + v(x - 2.0 * h)) / (4.0 * h * h);
            let d1 = (4.0 * d1 - d1b) / 3.0;
            let d2 = (4.0 * d2 - d2b) / 3.0;
            let lhs = 0.5 * p.sigma * p.sigma * d2 + drift(&p, x) * d1 - p.rho * v(x);
            let rhs = crate::model::nt_rhs(&p, x, theta);
            assert!(((lhs - rhs) / rhs).abs() < 1e-6, "x={x} lhs={lhs} rhs={rhs}");
        }
    }

    #[test]
    fn particular_matches_closed_form_and_is_affine() {
        let pair = desk_pair();
        let comp = greens_particular(&pair).unwrap();
        let p = *comp.params();
        for &x in &[-0.1, 0.0, 0.05] {
            for &t in &[-2e-3, 1e-3] {
                let exact = -2.0 * p.lambda * t / p.rho - p.omega * x / (p.omega + p.rho);
                let (i, _) = comp.particular(x, t);
                assert!(((i - exact) / exact).abs() < 1e-6, "x={x} t={t} {i} {exact}");
            }
            let (t1, t2) = (-1.3e-3, 4.1e-3);
            let sum = comp.particular(x, t1).0 + comp.particular(x, t2).0;
            let mid = 2.0 * comp.particular(x, 0.5 * (t1 + t2)).0;
            assert!((sum - mid).abs() < 1e-12 * sum.abs().max(1.0));
        }
    }

    #[test]
    fn flat_signal_resolvent() {
        let p = ModelParams::new(0.02, 0.0, 1.0, 1e-3).unwrap();
        let pair = solve_homogeneous(&p, (-10.0, 10.0)).unwrap();
        let comp = greens_particular(&pair).unwrap();
        let theta = 2e-3;
        let exact = -2.0 * p.lambda * theta / p.rho;
        for &x in &[-3.0, 0.0, 3.0] {
            let (i, di) = comp.particular(x, theta);
            assert!(((i - exact) / exact).abs() < 1e-6, "x={x} {i}");
            assert!(di.abs() < 1e-6 * exact.abs());
        }
    }

    #[test]
    fn greens_jump_condition() {
        let pair = desk_pair();
        let comp = greens_particular(&pair).unwrap();
        let a = 0.5 * comp.params().sigma.powi(2);
        let xi = 0.01;
        let h = 1e-6;
        let right = (comp.greens(xi + 2.0 * h, xi) - comp.greens(xi + h, xi)) / h;
        let left = (comp.greens(xi - h, xi) - comp.greens(xi - 2.0 * h, xi)) / h;
        assert!(((right - left) * a - 1.0).abs() < 1e-3);
    }

    #[test]
    fn rejects_bad_domain() {
        let p = ModelParams::desk();
        assert!(solve_homogeneous(&p, (0.1, -0.1)).is_err());
    }
}
