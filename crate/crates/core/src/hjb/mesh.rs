//! Sheared (x, ξ) mesh for the HJB solve.
//!
//! Nodes sit at θ = s·x + ξ. The shear s is fitted to the centre line of the
//! pure linear-cost band, whose two edges are then almost horizontal in ξ, so
//! a ξ-mesh clustered around two fixed offsets resolves both edges at every x.

use crate::error::{Error, Result};
use crate::model::{linspace, ModelParams};
use crate::ms::{find_band_zero, greens_particular, half_width_estimate, solve_homogeneous, Band};

use super::{MeshKind, SolverConfig};

#[derive(Debug, Clone)]
pub struct HjbMesh {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    /// θ = shear·x + ξ.
    pub shear: f64,
    /// Linear-cost band used for clustering and for the far-field slope.
    pub reference: Option<Band>,
    /// Spacing of the uniform patch around each band edge (or the uniform step).
    pub fine_step: f64,
}

impl HjbMesh {
    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn nxi(&self) -> usize {
        self.xi.len()
    }

    pub fn theta(&self, i: usize, j: usize) -> f64 {
        self.shear * self.x[i] + self.xi[j]
    }

    /// Reference edges (Θ⁺, Θ⁻) at node i, falling back to the fitted lines.
    pub(crate) fn reference_edges(&self, i: usize) -> Option<(f64, f64)> {
        let band = self.reference.as_ref()?;
        if band.valid[i] {
            return Some((band.theta_plus[i], band.theta_minus[i]));
        }
        let (lo, hi) = edge_offsets(band, self.shear)?;
        let mid = 0.5 * (lo + hi);
        Some((self.shear * self.x[i] + mid, mid - self.shear * self.x[i]))
    }
}

/// Linear-cost band on the given x-nodes, or None when it cannot be resolved
/// inside a 35% wider domain (for instance when Γ is so large that the band
/// leaves the domain).
pub fn reference_band(params: &ModelParams, gamma_lin: f64, x: &[f64]) -> Option<Band> {
    let reach = x.iter().fold(0.0f64, |m, v| m.max(v.abs())) * 1.35;
    let pair = solve_homogeneous(params, (-reach, reach)).ok()?;
    let comp = greens_particular(&pair).ok()?;
    let band = find_band_zero(&comp, gamma_lin, x).ok()?;
    let n_ok = band.valid.iter().filter(|&&v| v).count();
    (n_ok >= 2 && band.theta_plus.iter().zip(&band.valid).all(|(t, &v)| !v || t.is_finite())).then_some(band)
}

/// Least-squares slope through the origin of the band centre line.
fn fit_shear(band: &Band) -> f64 {
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for i in 0..band.len() {
        if band.valid[i] {
            let c = 0.5 * (band.theta_plus[i] - band.theta_minus[i]);
            sxy += band.x_nodes[i] * c;
            sxx += band.x_nodes[i] * band.x_nodes[i];
        }
    }
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

/// Range of ξ-offsets of the upper edge over valid nodes.
fn edge_offsets(band: &Band, shear: f64) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..band.len() {
        if band.valid[i] {
            let p = band.theta_plus[i] - shear * band.x_nodes[i];
            let m = band.theta_minus[i] + shear * band.x_nodes[i];
            lo = lo.min(p).min(m);
            hi = hi.max(p).max(m);
        }
    }
    (lo.is_finite() && lo > 0.0).then_some((lo, hi))
}

/// Geometric steps starting at `h0`, ratio `r`, capped at `cap`, rescaled to
/// cover exactly `length`.
fn graded_steps(length: f64, h0: f64, r: f64, cap: f64) -> Vec<f64> {
    let mut steps = Vec::new();
    let mut total = 0.0;
    let mut h = h0;
    while total < length {
        steps.push(h);
        total += h;
        h = (h * r).min(cap);
    }
    let scale = length / total;
    steps.iter().map(|s| s * scale).collect()
}

/// Upper half (ξ ≥ 0, starting at 0) of the clustered mesh.
fn clustered_half(lo: f64, hi: f64, w: f64, fine: f64, stretch: f64, r_max: f64) -> Vec<f64> {
    let f_lo = (lo - 0.25 * w).max(0.5 * lo);
    let f_hi = hi + 0.1 * w;
    let n_fine = ((f_hi - f_lo) / fine).ceil() as usize;
    let fine = (f_hi - f_lo) / n_fine as f64;
    // inner part, graded from the fine patch down to the centre
    let inner = graded_steps(f_lo, fine, stretch, (w / 50.0).max(fine));
    let mut out = vec![0.0];
    let mut pos = 0.0;
    for s in inner.iter().rev() {
        pos += s;
        out.push(pos);
    }
    *out.last_mut().unwrap() = f_lo;
    for k in 1..=n_fine {
        out.push(f_lo + k as f64 * fine);
    }
    if r_max > f_hi {
        let outer = graded_steps(r_max - f_hi, fine, stretch, ((r_max - f_hi) / 40.0).max(fine));
        pos = f_hi;
        for s in outer {
            pos += s;
            out.push(pos);
        }
        *out.last_mut().unwrap() = r_max;
    }
    out
}

/// Builds the mesh for x-nodes `x` and ξ-extent `xi_range` (the θ-extent of
/// an unsheared grid).
pub fn build_mesh(
    params: &ModelParams,
    gamma_lin: f64,
    x: &[f64],
    xi_range: (f64, f64),
    n_uniform: usize,
    cfg: &SolverConfig,
) -> Result<HjbMesh> {
    if x.len() < 5 || n_uniform < 5 {
        return Err(Error::Config("HJB grid needs at least 5 nodes per axis".into()));
    }
    if !(xi_range.0 < 0.0 && xi_range.1 > 0.0) {
        return Err(Error::Config(format!("theta range {xi_range:?} must contain 0")));
    }
    let reference = reference_band(params, gamma_lin, x);
    let shear = reference.as_ref().map(fit_shear).unwrap_or(0.0);
    let w = half_width_estimate(params, gamma_lin);
    let offsets = reference.as_ref().and_then(|b| edge_offsets(b, shear));
    match (cfg.mesh, offsets) {
        (MeshKind::Clustered, Some((lo, hi))) => {
            let fine = cfg.fine_step.unwrap_or(1e-3 * w);
            let r_max = xi_range.1.min(-xi_range.0);
            if !(fine > 0.0) || hi + 0.1 * w >= r_max {
                return Err(Error::Config(format!(
                    "clustered mesh: fine step {fine:e} or theta half-range {r_max:e} inconsistent with band edge {hi:e}"
                )));
            }
            let half = clustered_half(lo, hi, w, fine, cfg.stretch, r_max);
            let mut xi: Vec<f64> = half.iter().skip(1).rev().map(|v| -v).collect();
            xi.extend_from_slice(&half);
            Ok(HjbMesh { x: x.to_vec(), xi, shear, reference, fine_step: fine })
        }
        _ => {
            let xi = linspace(xi_range.0, xi_range.1, n_uniform);
            let h = xi[1] - xi[0];
            Ok(HjbMesh { x: x.to_vec(), xi, shear, reference, fine_step: h })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_steps_cover_length() {
        let s = graded_steps(1.0, 1e-3, 1.1, 0.05);
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(s.windows(2).all(|w| w[1] >= w[0] * 0.999));
        assert!(s.iter().all(|&v| v <= 0.05 + 1e-12));
    }

    #[test]
    fn clustered_half_is_increasing_with_fine_patch() {
        let h = clustered_half(4e-4, 4.2e-4, 4e-4, 1e-6, 1.05, 0.05);
        assert_eq!(h[0], 0.0);
        assert!(h.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*h.last().unwrap(), 0.05);
        let near = h.windows(2).find(|w| w[0] <= 4.1e-4 && w[1] > 4.1e-4).unwrap();
        assert!((near[1] - near[0]) <= 1.0001e-6);
    }
}
