//! Finite-difference solver for the discounted stationary HJB equation
//!
//!   ρV = μθ − λθ² + max_v{−Γ|v| − ηv² + V_θ v} + 𝓛_x V
//!
//! used as an independent oracle for the band and velocity asymptotics.

mod diagnostics;
mod mesh;

pub use diagnostics::{c2_continuity_check, classify_regimes, extract_band, velocity_slice, BoundaryJumps, ContinuityReport};
pub use mesh::{build_mesh, reference_band, HjbMesh};

use serde::{Deserialize, Serialize};

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::model::{drift, CostKind, CostParams, ModelParams};
use crate::ms::Band;

/// How policies are improved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Howard policy iteration, each policy evaluated by a banded LU solve.
    Policy,
    /// Explicit pseudo-time value iteration. Only practical on coarse meshes.
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshKind {
    Uniform,
    Clustered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// CFL factor of the explicit scheme.
    pub pseudo_time_step: f64,
    /// Relative to max(1, max|V|).
    pub convergence_tol: f64,
    /// Smallest η accepted.
    pub eta_floor: f64,
    pub scheme: Scheme,
    pub mesh: MeshKind,
    /// Spacing of the patches around the band edges; defaults to 10⁻³ of the
    /// band half-width.
    pub fine_step: Option<f64>,
    /// Growth ratio of the graded ξ-mesh.
    pub stretch: f64,
    /// Band-extraction threshold, relative to max|v| on the x-column.
    pub threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 200,
            pseudo_time_step: 0.9,
            convergence_tol: 1e-10,
            eta_floor: 1e-12,
            scheme: Scheme::Policy,
            mesh: MeshKind::Clustered,
            fine_step: None,
            stretch: 1.05,
            threshold: 1e-4,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let p = self.pseudo_time_step;
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::Config(format!("pseudo_time_step (CFL factor) must lie in (0, 1], got {p}")));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::Config("convergence_tol must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.eta_floor > 0.0) {
            return Err(Error::Config("eta_floor must be positive".into()));
        }
        if !(self.stretch > 1.0 && self.stretch <= 2.0) {
            return Err(Error::Config(format!("stretch must lie in (1, 2], got {}", self.stretch)));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!("threshold must lie in (0, 1), got {}", self.threshold)));
        }
        if let Some(h) = self.fine_step {
            if !(h > 0.0) {
                return Err(Error::Config("fine_step must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Converged solution on a sheared mesh. Values are stored x-fastest,
/// index i + nx·j.
#[derive(Debug, Clone)]
pub struct ValueGrid {
    pub mesh: HjbMesh,
    pub params: ModelParams,
    pub costs: CostParams,
    pub value: Vec<f64>,
    pub velocity: Vec<f64>,
    /// Band extracted with the configured threshold.
    pub band: Band,
    pub threshold: f64,
    /// Final max HJB residual, in units of the pseudo-time update.
    pub residual: f64,
    pub iterations: usize,
    /// Max value update per iteration.
    pub history: Vec<f64>,
}

impl ValueGrid {
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.mesh.nx() * j
    }

    pub fn v_at(&self, i: usize, j: usize) -> f64 {
        self.value[self.index(i, j)]
    }

    pub fn velocity_at(&self, i: usize, j: usize) -> f64 {
        self.velocity[self.index(i, j)]
    }

    pub fn theta(&self, i: usize, j: usize) -> f64 {
        self.mesh.theta(i, j)
    }
}

/// Frictionless value of holding θ forever.
fn hold_value(p: &ModelParams, x: f64, theta: f64) -> f64 {
    -p.lambda * theta * theta / p.rho - theta * p.omega * x / (p.omega + p.rho)
}

/// Discrete operator on a mesh for fixed model and costs.
struct Discretization<'a> {
    mesh: &'a HjbMesh,
    params: ModelParams,
    gamma: f64,
    eta: f64,
    /// Neumann data on the two ξ-edges, per x-node.
    slope_lo: Vec<f64>,
    slope_hi: Vec<f64>,
}

/// One matrix row: up to nine couplings and the right-hand side.
struct Row {
    cols: [(usize, f64); 10],
    len: usize,
    rhs: f64,
}

impl Row {
    fn new(rhs: f64) -> Self {
        Row { cols: [(0, 0.0); 10], len: 0, rhs }
    }

    fn push(&mut self, k: usize, c: f64) {
        if let Some(e) = self.cols[..self.len].iter_mut().find(|e| e.0 == k) {
            e.1 += c;
        } else {
            self.cols[self.len] = (k, c);
            self.len += 1;
        }
    }

    fn entries(&self) -> &[(usize, f64)] {
        &self.cols[..self.len]
    }

    fn diag(&self, k: usize) -> f64 {
        self.entries().iter().find(|e| e.0 == k).map(|e| e.1).unwrap_or(0.0)
    }
}

/// Central first-derivative weights on a non-uniform 3-point stencil.
fn central(hm: f64, hp: f64) -> [f64; 3] {
    [-hp / (hm * (hm + hp)), (hp - hm) / (hm * hp), hm / (hp * (hm + hp))]
}

fn second(hm: f64, hp: f64) -> [f64; 3] {
    let s = hm + hp;
    [2.0 / (hm * s), -2.0 / (hm * hp), 2.0 / (hp * s)]
}

/// Drift term weights: centred when the cell Péclet number allows it.
fn advect(b: f64, diff: f64, hm: f64, hp: f64) -> [f64; 3] {
    if b.abs() * hm.max(hp) <= 2.0 * diff {
        let c = central(hm, hp);
        [b * c[0], b * c[1], b * c[2]]
    } else if b > 0.0 {
        [0.0, -b / hp, b / hp]
    } else {
        [-b / hm, b / hm, 0.0]
    }
}

impl<'a> Discretization<'a> {
    fn new(mesh: &'a HjbMesh, params: ModelParams, costs: &CostParams) -> Self {
        let (nx, nxi) = (mesh.nx(), mesh.nxi());
        let eta = costs.eta;
        let g = costs.gamma_lin;
        let mut slope_lo = vec![0.0; nx];
        let mut slope_hi = vec![0.0; nx];
        for i in 0..nx {
            let x = mesh.x[i];
            let mu = drift(&params, x);
            let edges = mesh.reference_edges(i);
            for (j, out) in [(0usize, &mut slope_lo[i]), (nxi - 1, &mut slope_hi[i])] {
                let th = mesh.theta(i, j);
                *out = match edges {
                    Some((tp, _)) if th > tp => {
                        let r = params.lambda * (th * th - tp * tp) - mu * (th - tp);
                        -g - 2.0 * eta.sqrt() * r.max(0.0).sqrt()
                    }
                    Some((_, tm)) if th < -tm => {
                        let r = params.lambda * (th * th - tm * tm) - mu * (th + tm);
                        g + 2.0 * eta.sqrt() * r.max(0.0).sqrt()
                    }
                    _ => {
                        let p = -2.0 * params.lambda * th / params.rho - params.omega * x / (params.omega + params.rho);
                        p.clamp(-g, g)
                    }
                };
            }
        }
        Discretization { mesh, params, gamma: g, eta, slope_lo, slope_hi }
    }

    fn n(&self) -> usize {
        self.mesh.nx() * self.mesh.nxi()
    }

    /// Row of the policy-evaluation system at node (i, j) for control v.
    fn row(&self, i: usize, j: usize, v: f64) -> Row {
        let m = self.mesh;
        let nx = m.nx();
        let k = |a: usize, b: usize| a + nx * b;
        let nxi = m.nxi();
        if i == 0 || i == nx - 1 {
            // linear extrapolation in x at fixed ξ
            let (i1, i2) = if i == 0 { (1, 2) } else { (nx - 2, nx - 3) };
            let r = (m.x[i1] - m.x[i]) / (m.x[i2] - m.x[i1]);
            let mut row = Row::new(0.0);
            row.push(k(i, j), 1.0);
            row.push(k(i1, j), -(1.0 + r));
            row.push(k(i2, j), r);
            return row;
        }
        if j == 0 {
            let h = m.xi[1] - m.xi[0];
            let mut row = Row::new(-h * self.slope_lo[i]);
            row.push(k(i, 0), 1.0);
            row.push(k(i, 1), -1.0);
            return row;
        }
        if j == nxi - 1 {
            let h = m.xi[j] - m.xi[j - 1];
            let mut row = Row::new(h * self.slope_hi[i]);
            row.push(k(i, j), 1.0);
            row.push(k(i, j - 1), -1.0);
            return row;
        }
        let p = &self.params;
        let x = m.x[i];
        let th = m.theta(i, j);
        let mu = drift(p, x);
        let a = 0.5 * p.sigma * p.sigma;
        let kappa = -m.shear; // ξ_x at fixed θ
        let (hxm, hxp) = (x - m.x[i - 1], m.x[i + 1] - x);
        let (hm, hp) = (m.xi[j] - m.xi[j - 1], m.xi[j + 1] - m.xi[j]);

        let cost = self.gamma * v.abs() + self.eta * v * v;
        let mut row = Row::new(mu * th - p.lambda * th * th - cost);
        row.push(k(i, j), p.rho);
        // the operator enters with a minus sign: ρW − 𝓛W − v·D W = rhs
        let dxx = second(hxm, hxp);
        let dx = advect(mu, a, hxm, hxp);
        for (o, ii) in [i - 1, i, i + 1].into_iter().enumerate() {
            row.push(k(ii, j), -(a * dxx[o] + dx[o]));
        }
        let dxixi = second(hm, hp);
        let dxi = advect(mu * kappa, a * kappa * kappa, hm, hp);
        for (o, jj) in [j - 1, j, j + 1].into_iter().enumerate() {
            row.push(k(i, jj), -(a * kappa * kappa * dxixi[o] + dxi[o]));
        }
        if kappa != 0.0 {
            let c = 2.0 * a * kappa / ((hxm + hxp) * (hm + hp));
            row.push(k(i + 1, j + 1), -c);
            row.push(k(i - 1, j - 1), -c);
            row.push(k(i + 1, j - 1), c);
            row.push(k(i - 1, j + 1), c);
        }
        if v > 0.0 {
            row.push(k(i, j + 1), -v / hp);
            row.push(k(i, j), v / hp);
        } else if v < 0.0 {
            row.push(k(i, j), -v / hm);
            row.push(k(i, j - 1), v / hm);
        }
        row
    }

    /// Closed-form optimal control from one-sided slopes at (i, j).
    fn control(&self, w: &[f64], i: usize, j: usize) -> f64 {
        let m = self.mesh;
        let nx = m.nx();
        let nxi = m.nxi();
        let at = |jj: usize| w[i + nx * jj];
        let pp = if j + 1 < nxi { (at(j + 1) - at(j)) / (m.xi[j + 1] - m.xi[j]) } else { self.slope_hi[i] };
        let pm = if j > 0 { (at(j) - at(j - 1)) / (m.xi[j] - m.xi[j - 1]) } else { self.slope_lo[i] };
        optimal_control(pp, pm, self.gamma, self.eta)
    }

    fn policy(&self, w: &[f64]) -> Vec<f64> {
        let (nx, nxi) = (self.mesh.nx(), self.mesh.nxi());
        let mut v = vec![0.0; nx * nxi];
        for j in 0..nxi {
            for i in 0..nx {
                v[i + nx * j] = self.control(w, i, j);
            }
        }
        v
    }

    fn assemble(&self, v: &[f64]) -> (BandMatrix, Vec<f64>) {
        let nx = self.mesh.nx();
        let n = self.n();
        let mut a = BandMatrix::zeros(n, nx + 1, nx + 1);
        let mut b = vec![0.0; n];
        for j in 0..self.mesh.nxi() {
            for i in 0..nx {
                let kk = i + nx * j;
                let row = self.row(i, j, v[kk]);
                for &(c, val) in row.entries() {
                    a.add(kk, c, val);
                }
                b[kk] = row.rhs;
            }
        }
        (a, b)
    }

    /// Max over interior nodes of |HJB residual| / diagonal, with the policy
    /// re-optimised at w.
    fn residual(&self, w: &[f64]) -> f64 {
        let nx = self.mesh.nx();
        let mut worst: f64 = 0.0;
        for j in 1..self.mesh.nxi() - 1 {
            for i in 1..nx - 1 {
                let kk = i + nx * j;
                let row = self.row(i, j, self.control(w, i, j));
                let r: f64 = row.entries().iter().map(|&(c, val)| val * w[c]).sum::<f64>() - row.rhs;
                worst = worst.max(r.abs() / row.diag(kk));
            }
        }
        worst
    }

    /// Initial policy: zero inside the reference band, outer asymptote outside.
    fn initial_policy(&self) -> Vec<f64> {
        let m = self.mesh;
        let (nx, nxi) = (m.nx(), m.nxi());
        let mut v = vec![0.0; nx * nxi];
        for i in 0..nx {
            let Some((tp, tm)) = m.reference_edges(i) else { continue };
            let mu = drift(&self.params, m.x[i]);
            let l = self.params.lambda;
            for j in 0..nxi {
                let th = m.theta(i, j);
                v[i + nx * j] = if th > tp {
                    -(l * (th * th - tp * tp) - mu * (th - tp)).max(0.0).sqrt() / self.eta.sqrt()
                } else if th < -tm {
                    (l * (th * th - tm * tm) - mu * (th + tm)).max(0.0).sqrt() / self.eta.sqrt()
                } else {
                    0.0
                };
            }
        }
        v
    }
}

/// Maximiser of −Γ|v| − ηv² + p·v with the slope taken upwind:
/// forward slope for buying, backward slope for selling.
pub fn optimal_control(p_forward: f64, p_backward: f64, gamma: f64, eta: f64) -> f64 {
    let buy = ((p_forward - gamma) / (2.0 * eta)).max(0.0);
    let sell = ((p_backward + gamma) / (2.0 * eta)).min(0.0);
    let gain_buy = (p_forward - gamma).max(0.0).powi(2);
    let gain_sell = (-p_backward - gamma).max(0.0).powi(2);
    if gain_buy == 0.0 && gain_sell == 0.0 {
        0.0
    } else if gain_buy >= gain_sell {
        buy
    } else {
        sell
    }
}

fn check_inputs(params: &ModelParams, costs: &CostParams, cfg: &SolverConfig) -> Result<()> {
    params.validate()?;
    costs.validate()?;
    cfg.validate()?;
    if costs.kind != CostKind::Quadratic {
        return Err(Error::Config("the HJB oracle handles the quadratic cost only".into()));
    }
    if costs.eta < cfg.eta_floor {
        return Err(Error::Config(format!("eta {:e} below eta_floor {:e}", costs.eta, cfg.eta_floor)));
    }
    if params.omega <= 0.0 {
        return Err(Error::Regime("the HJB oracle needs a mean-reverting signal (omega > 0)".into()));
    }
    Ok(())
}

/// Solves on a prepared mesh (shared across a sweep).
pub fn solve_on_mesh(params: &ModelParams, costs: &CostParams, mesh: &HjbMesh, cfg: &SolverConfig) -> Result<ValueGrid> {
    check_inputs(params, costs, cfg)?;
    let disc = Discretization::new(mesh, *params, costs);
    let (value, iterations, history) = match cfg.scheme {
        Scheme::Policy => howard(&disc, cfg)?,
        Scheme::Explicit => explicit(&disc, cfg)?,
    };
    let velocity = disc.policy(&value);
    let residual = disc.residual(&value);
    let mut vg = ValueGrid {
        mesh: mesh.clone(),
        params: *params,
        costs: *costs,
        value,
        velocity,
        band: Band {
            x_nodes: vec![],
            theta_plus: vec![],
            theta_minus: vec![],
            theta_plus_deriv: vec![],
            theta_minus_deriv: vec![],
            valid: vec![],
            gamma_lin: costs.gamma_lin,
        },
        threshold: cfg.threshold,
        residual,
        iterations,
        history,
    };
    vg.band = extract_band(&vg, cfg.threshold);
    Ok(vg)
}

/// Builds the mesh from x-nodes and the θ-range, then solves.
pub fn solve_hjb(
    params: &ModelParams,
    costs: &CostParams,
    x: &[f64],
    theta_range: (f64, f64),
    ntheta: usize,
    cfg: &SolverConfig,
) -> Result<ValueGrid> {
    check_inputs(params, costs, cfg)?;
    let mesh = build_mesh(params, costs.gamma_lin, x, theta_range, ntheta, cfg)?;
    solve_on_mesh(params, costs, &mesh, cfg)
}

fn value_scale(w: &[f64]) -> f64 {
    w.iter().fold(1.0f64, |m, v| m.max(v.abs()))
}

fn howard(disc: &Discretization, cfg: &SolverConfig) -> Result<(Vec<f64>, usize, Vec<f64>)> {
    let mut v = disc.initial_policy();
    let mut w: Option<Vec<f64>> = None;
    let mut history = Vec::new();
    for it in 1..=cfg.max_iters {
        let (a, b) = disc.assemble(&v);
        let next = a.solve(&b)?;
        if next.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonConvergence { iterations: it, residual: f64::INFINITY });
        }
        if let Some(prev) = &w {
            let delta = prev.iter().zip(&next).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
            history.push(delta);
            if delta <= cfg.convergence_tol * value_scale(&next) {
                return Ok((next, it, history));
            }
        }
        v = disc.policy(&next);
        w = Some(next);
    }
    Err(Error::NonConvergence { iterations: cfg.max_iters, residual: history.last().copied().unwrap_or(f64::INFINITY) })
}

fn explicit(disc: &Discretization, cfg: &SolverConfig) -> Result<(Vec<f64>, usize, Vec<f64>)> {
    let m = disc.mesh;
    let (nx, nxi) = (m.nx(), m.nxi());
    let mut w = vec![0.0; nx * nxi];
    for j in 0..nxi {
        for i in 0..nx {
            w[i + nx * j] = hold_value(&disc.params, m.x[i], m.theta(i, j));
        }
    }
    let mut history = Vec::new();
    for it in 1..=cfg.max_iters {
        let v = disc.policy(&w);
        let rows: Vec<(usize, Row)> = (1..nxi - 1)
            .flat_map(|j| (1..nx - 1).map(move |i| (i, j)))
            .map(|(i, j)| (i + nx * j, disc.row(i, j, v[i + nx * j])))
            .collect();
        let dmax = rows.iter().map(|(k, r)| r.diag(*k)).fold(0.0f64, f64::max);
        let dt = cfg.pseudo_time_step / dmax;
        let mut next = w.clone();
        let mut delta: f64 = 0.0;
        for (k, r) in &rows {
            let f: f64 = r.entries().iter().map(|&(c, val)| val * w[c]).sum::<f64>() - r.rhs;
            next[*k] = w[*k] - dt * f;
            delta = delta.max((dt * f).abs());
        }
        // ξ-edges, then x-edges (which also fixes the corners)
        for i in 1..nx - 1 {
            for j in [0, nxi - 1] {
                let r = disc.row(i, j, 0.0);
                let k = i + nx * j;
                let off: f64 = r.entries().iter().filter(|e| e.0 != k).map(|&(c, val)| val * next[c]).sum();
                next[k] = (r.rhs - off) / r.diag(k);
            }
        }
        for j in 0..nxi {
            for i in [0, nx - 1] {
                let r = disc.row(i, j, 0.0);
                let k = i + nx * j;
                let off: f64 = r.entries().iter().filter(|e| e.0 != k).map(|&(c, val)| val * next[c]).sum();
                next[k] = (r.rhs - off) / r.diag(k);
            }
        }
        if next.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonConvergence { iterations: it, residual: f64::INFINITY });
        }
        history.push(delta);
        w = next;
        if delta <= cfg.convergence_tol * cfg.pseudo_time_step * value_scale(&w) {
            return Ok((w, it, history));
        }
    }
    Err(Error::NonConvergence { iterations: cfg.max_iters, residual: history.last().copied().unwrap_or(f64::INFINITY) })
}

#[cfg(test)]
mod tests;
