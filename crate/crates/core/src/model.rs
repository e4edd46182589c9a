//! Problem definition: signal dynamics, cost structure, grids and the Itô generator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Signal dynamics and preferences. All rates are per day.
///
/// The predictor follows `dX = -Ω X dt + σ dW`; `lambda` is the risk cost per
/// position² per day and `rho` the discount rate that regularizes the ergodic
/// objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub sigma: f64,
    pub omega: f64,
    pub lambda: f64,
    pub rho: f64,
}

impl ModelParams {
    pub fn new(sigma: f64, omega: f64, lambda: f64, rho: f64) -> Result<Self> {
        let p = ModelParams { sigma, omega, lambda, rho };
        p.validate()?;
        Ok(p)
    }

    /// Desk-scale OU parameters used throughout the tests and examples.
    pub fn desk() -> Self {
        ModelParams { sigma: 0.02, omega: 0.1, lambda: 1.0, rho: 1e-3 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite();
        if !(ok(self.sigma) && self.sigma > 0.0) {
            return Err(Error::Config(format!("model.sigma must be > 0, got {}", self.sigma)));
        }
        if !(ok(self.omega) && self.omega >= 0.0) {
            return Err(Error::Config(format!("model.omega must be >= 0, got {}", self.omega)));
        }
        if !(ok(self.lambda) && self.lambda > 0.0) {
            return Err(Error::Config(format!("model.lambda must be > 0, got {}", self.lambda)));
        }
        if !(ok(self.rho) && self.rho > 0.0) {
            return Err(Error::Config(format!("model.rho must be > 0, got {}", self.rho)));
        }
        Ok(())
    }

    /// Stationary standard deviation σ/√(2Ω) of the OU signal.
    pub fn stationary_std(&self) -> f64 {
        if self.omega > 0.0 {
            self.sigma / (2.0 * self.omega).sqrt()
        } else {
            f64::INFINITY
        }
    }

    /// Default symmetric x-domain of ±`k` stationary deviations.
    pub fn default_x_domain(&self, k: f64) -> (f64, f64) {
        let s = self.stationary_std();
        (-k * s, k * s)
    }
}

/// Which nonlinear cost accompanies the linear cost.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    #[default]
    Quadratic,
    ThreeHalves,
}

impl CostKind {
    pub fn name(&self) -> &'static str {
        match self {
            CostKind::Quadratic => "quadratic",
            CostKind::ThreeHalves => "three_halves",
        }
    }
}

/// Linear cost Γ plus one active nonlinear cost (η for quadratic, ζ for 3/2-power).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostParams {
    pub gamma_lin: f64,
    #[serde(default)]
    pub eta: f64,
    #[serde(default)]
    pub zeta: f64,
    #[serde(default)]
    pub kind: CostKind,
}

impl CostParams {
    pub fn quadratic(gamma_lin: f64, eta: f64) -> Result<Self> {
        let c = CostParams { gamma_lin, eta, zeta: 0.0, kind: CostKind::Quadratic };
        c.validate()?;
        Ok(c)
    }

    pub fn three_halves(gamma_lin: f64, zeta: f64) -> Result<Self> {
        let c = CostParams { gamma_lin, eta: 0.0, zeta, kind: CostKind::ThreeHalves };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_lin.is_finite() && self.gamma_lin > 0.0) {
            return Err(Error::Config(format!("cost.gamma_lin must be > 0, got {}", self.gamma_lin)));
        }
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::Config(format!("cost.eta must be >= 0, got {}", self.eta)));
        }
        if !(self.zeta.is_finite() && self.zeta >= 0.0) {
            return Err(Error::Config(format!("cost.zeta must be >= 0, got {}", self.zeta)));
        }
        match self.kind {
            CostKind::Quadratic if self.zeta != 0.0 => Err(Error::Config(
                "cost.kind = quadratic but cost.zeta is nonzero".into(),
            )),
            CostKind::ThreeHalves if self.eta != 0.0 => Err(Error::Config(
                "cost.kind = three_halves but cost.eta is nonzero".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// OU drift μ(x) = −Ω x.
pub fn drift(params: &ModelParams, x: f64) -> f64 {
    -params.omega * x
}

/// Right-hand side of the no-trade equation, −μ(x)θ + λθ².
pub fn nt_rhs(params: &ModelParams, x: f64, theta: f64) -> f64 {
    -drift(params, x) * theta + params.lambda * theta * theta
}

/// Markowitz position μ(x)/2λ.
pub fn markowitz(params: &ModelParams, x: f64) -> f64 {
    drift(params, x) / (2.0 * params.lambda)
}

/// Rectangular tensor grid over (x, θ).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    x: Vec<f64>,
    theta: Vec<f64>,
}

impl Grid2D {
    pub fn new(x: Vec<f64>, theta: Vec<f64>) -> Result<Self> {
        check_axis("x", &x)?;
        check_axis("theta", &theta)?;
        Ok(Grid2D { x, theta })
    }

    pub fn uniform(x_min: f64, x_max: f64, nx: usize, t_min: f64, t_max: f64, nt: usize) -> Result<Self> {
        Grid2D::new(linspace(x_min, x_max, nx), linspace(t_min, t_max, nt))
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn ntheta(&self) -> usize {
        self.theta.len()
    }

    /// Step along x if the axis is uniform.
    pub fn hx(&self) -> Option<f64> {
        uniform_step(&self.x)
    }

    pub fn htheta(&self) -> Option<f64> {
        uniform_step(&self.theta)
    }
}

fn check_axis(name: &str, nodes: &[f64]) -> Result<()> {
    if nodes.len() < 3 {
        return Err(Error::Config(format!("{name} axis needs at least 3 nodes, got {}", nodes.len())));
    }
    if nodes.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config(format!("{name} axis has non-finite nodes")));
    }
    if nodes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!("{name} axis must be strictly increasing")));
    }
    Ok(())
}

fn uniform_step(nodes: &[f64]) -> Option<f64> {
    let h = (nodes[nodes.len() - 1] - nodes[0]) / (nodes.len() - 1) as f64;
    let tol = 1e-9 * h.abs().max(f64::MIN_POSITIVE);
    nodes.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= tol).then_some(h)
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Real field sampled on a [`Grid2D`], stored x-major: `values[ix * ntheta + it]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn from_fn(grid: &Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.nx() * grid.ntheta());
        for &x in grid.x() {
            for &t in grid.theta() {
                values.push(f(x, t));
            }
        }
        ScalarField { grid: grid.clone(), values }
    }

    pub fn from_values(grid: &Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.nx() * grid.ntheta() {
            return Err(Error::Config(format!(
                "field has {} values but grid has {} nodes",
                values.len(),
                grid.nx() * grid.ntheta()
            )));
        }
        Ok(ScalarField { grid: grid.clone(), values })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, ix: usize, it: usize) -> f64 {
        self.values[ix * self.grid.ntheta() + it]
    }

    pub fn set(&mut self, ix: usize, it: usize, v: f64) {
        let nt = self.grid.ntheta();
        self.values[ix * nt + it] = v;
    }

    /// Pointwise `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &ScalarField, b: f64) -> ScalarField {
        let values = self.values.iter().zip(&other.values).map(|(u, v)| a * u + b * v).collect();
        ScalarField { grid: self.grid.clone(), values }
    }
}

/// Finite-difference weights for derivatives 0..=m at `z` from arbitrary `nodes`
/// (Fornberg's recursion). Returns `w[k][j]`, the weight of node j in the k-th derivative.
pub fn fd_weights(z: f64, nodes: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - z;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] *= c4 / c3;
        }
        c1 = c2;
    }
    c
}

/// Applies `μ(x) ∂ₓf + (σ²/2) ∂ₓₓf − ρ f` along x for every θ column.
///
/// Interior nodes use three-point stencils; the two edge nodes use one-sided
/// four-point stencils (three-point when only three nodes exist).
pub fn apply_generator(params: &ModelParams, f: &ScalarField) -> Result<ScalarField> {
    let grid = f.grid();
    let nx = grid.nx();
    if nx < 3 {
        return Err(Error::Config("generator needs at least 3 x-nodes".into()));
    }
    let xs = grid.x();
    let half_var = 0.5 * params.sigma * params.sigma;
    let stencils: Vec<(usize, Vec<f64>, Vec<f64>)> = (0..nx)
        .map(|i| {
            let (start, len) = if i == 0 {
                (0, nx.min(4))
            } else if i == nx - 1 {
                let len = nx.min(4);
                (nx - len, len)
            } else {
                (i - 1, 3)
            };
            let w = fd_weights(xs[i], &xs[start..start + len], 2);
            (start, w[1].clone(), w[2].clone())
        })
        .collect();

    let mut out = f.clone();
    for it in 0..grid.ntheta() {
        for (i, (start, w1, w2)) in stencils.iter().enumerate() {
            let mut d1 = 0.0;
            let mut d2 = 0.0;
            for (k, (a, b)) in w1.iter().zip(w2).enumerate() {
                let v = f.get(start + k, it);
                d1 += a * v;
                d2 += b * v;
            }
            let x = xs[i];
            out.set(i, it, drift(params, x) * d1 + half_var * d2 - params.rho * f.get(i, it));
        }
    }
    Ok(out)
}
