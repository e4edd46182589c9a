//! Post-processing of a solved value grid.

use crate::asymptotics::{Regime, VelocityProfile};
use crate::error::{Error, Result};
use crate::model::fd_weights;
use crate::ms::Band;

use super::ValueGrid;

/// Column j-range [lo, hi] of nodes with |v| ≤ thr around the column centre,
/// or None if there is none or it touches a ξ-edge.
fn nt_run(vel: &[f64], thr: f64) -> Option<(usize, usize)> {
    let n = vel.len();
    let mid = n / 2;
    let seed = (0..n)
        .filter(|&j| vel[j].abs() <= thr)
        .min_by_key(|&j| (j as isize - mid as isize).unsigned_abs())?;
    let mut hi = seed;
    while hi + 1 < n && vel[hi + 1].abs() <= thr {
        hi += 1;
    }
    let mut lo = seed;
    while lo > 0 && vel[lo - 1].abs() <= thr {
        lo -= 1;
    }
    (lo > 0 && hi + 1 < n).then_some((lo, hi))
}

fn column(vg: &ValueGrid, i: usize, data: &[f64]) -> Vec<f64> {
    (0..vg.mesh.nxi()).map(|j| data[vg.index(i, j)]).collect()
}

fn crossing(t0: f64, t1: f64, a0: f64, a1: f64, thr: f64) -> f64 {
    if a1 == a0 {
        return t0;
    }
    t0 + (t1 - t0) * ((thr - a0) / (a1 - a0)).clamp(0.0, 1.0)
}

/// Per x-node, the θ where |v| crosses threshold·max|v| (column maximum) on
/// each side of the no-trade run. Columns without a crossing are masked out.
pub fn extract_band(vg: &ValueGrid, threshold: f64) -> Band {
    let nx = vg.mesh.nx();
    let mut tp = vec![f64::NAN; nx];
    let mut tm = vec![f64::NAN; nx];
    let mut valid = vec![false; nx];
    for i in 0..nx {
        let vel = column(vg, i, &vg.velocity);
        let vmax = vel.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if vmax == 0.0 {
            continue;
        }
        let thr = threshold * vmax;
        let Some((lo, hi)) = nt_run(&vel, thr) else { continue };
        tp[i] = crossing(vg.theta(i, hi), vg.theta(i, hi + 1), vel[hi].abs(), vel[hi + 1].abs(), thr);
        tm[i] = -crossing(vg.theta(i, lo), vg.theta(i, lo - 1), vel[lo].abs(), vel[lo - 1].abs(), thr);
        valid[i] = true;
    }
    let x = vg.mesh.x.clone();
    let tpd = node_derivative(&x, &tp, &valid);
    let tmd = node_derivative(&x, &tm, &valid);
    Band {
        x_nodes: x,
        theta_plus: tp,
        theta_minus: tm,
        theta_plus_deriv: tpd,
        theta_minus_deriv: tmd,
        valid,
        gamma_lin: vg.costs.gamma_lin,
    }
}

fn node_derivative(x: &[f64], y: &[f64], ok: &[bool]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let l = if i > 0 && ok[i - 1] { i - 1 } else { i };
            let r = if i + 1 < n && ok[i + 1] { i + 1 } else { i };
            if !ok[i] || l == r {
                f64::NAN
            } else {
                (y[r] - y[l]) / (x[r] - x[l])
            }
        })
        .collect()
}

fn log_slope(a: (f64, f64), b: (f64, f64)) -> f64 {
    (b.1.ln() - a.1.ln()) / (b.0.ln() - a.0.ln())
}

/// Labels a velocity profile by local log-log slopes, walking outward from
/// each band edge: LAYER until the slope against the distance to the edge
/// drops below 3/4, then SQRT until the slope against |θ| falls to 1.1,
/// then LINEAR.
pub fn classify_regimes(theta: &[f64], v: &[f64], theta_plus: f64, theta_minus: f64, nt_level: f64) -> Vec<Regime> {
    let n = theta.len();
    let mut out = vec![Regime::NoTrade; n];
    for (edge, upper) in [(theta_plus, true), (-theta_minus, false)] {
        let outside = |j: usize| if upper { theta[j] > edge } else { theta[j] < edge };
        let mut idx: Vec<usize> = (0..n).filter(|&j| outside(j) && v[j].abs() > nt_level).collect();
        if !upper {
            idx.reverse();
        }
        let mut state = Regime::Layer;
        for w in 0..idx.len() {
            let j = idx[w];
            if w + 1 < idx.len() && w > 0 {
                let (a, b) = (idx[w - 1], idx[w + 1]);
                let d = |k: usize| (theta[k] - edge).abs();
                let s_edge = log_slope((d(a), v[a].abs()), (d(b), v[b].abs()));
                let s_zero = log_slope((theta[a].abs(), v[a].abs()), (theta[b].abs(), v[b].abs()));
                if state == Regime::Layer && s_edge < 0.75 {
                    state = Regime::Sqrt;
                }
                if state == Regime::Sqrt && s_zero.is_finite() && s_zero > 0.0 && s_zero <= 1.1 {
                    state = Regime::Linear;
                }
            }
            out[j] = state;
        }
    }
    out
}

/// θ-profile of v at the x-node nearest to `x`.
pub fn velocity_slice(vg: &ValueGrid, x: f64) -> Result<VelocityProfile> {
    let xs = &vg.mesh.x;
    if x < xs[0] || x > xs[xs.len() - 1] {
        return Err(Error::Domain(format!("x = {x} outside the HJB grid")));
    }
    let i = (0..xs.len())
        .min_by(|&a, &b| (xs[a] - x).abs().total_cmp(&(xs[b] - x).abs()))
        .unwrap_or(0);
    let theta: Vec<f64> = (0..vg.mesh.nxi()).map(|j| vg.theta(i, j)).collect();
    let v = column(vg, i, &vg.velocity);
    let vmax = v.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    let (tp, tm) = if vg.band.valid[i] { (vg.band.theta_plus[i], vg.band.theta_minus[i]) } else { (f64::INFINITY, f64::INFINITY) };
    let regime = classify_regimes(&theta, &v, tp, tm, vg.threshold * vmax);
    Ok(VelocityProfile { theta, v, regime, theta_eta: tp, seam: f64::NAN, gauge: 0.0, warning: false })
}

/// Jumps across one boundary crossing at one x-node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryJumps {
    /// Mismatch of the second difference extrapolated to the edge from each side.
    pub second: f64,
    /// Same for the first difference.
    pub first: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityReport {
    pub x: Vec<f64>,
    pub coarse: Vec<Option<BoundaryJumps>>,
    pub fine: Vec<Option<BoundaryJumps>>,
    /// Nodes where the boundary is nearly parallel to the x-axis.
    pub near_collinear: Vec<bool>,
    pub max_second: (f64, f64),
    pub max_first: (f64, f64),
    pub order_second: f64,
    pub order_first: f64,
    pub pass: bool,
}

/// Quadratic (Lagrange) extrapolation through three points to x.
fn extrapolate(p: [(f64, f64); 3], x: f64) -> f64 {
    let mut s = 0.0;
    for a in 0..3 {
        let mut l = 1.0;
        for b in 0..3 {
            if a != b {
                l *= (x - p[b].0) / (p[a].0 - p[b].0);
            }
        }
        s += l * p[a].1;
    }
    s
}

/// Jumps on the upper and lower edge of column i, taking the larger.
///
/// The last no-trade node comes from the discrete policy (v = 0 exactly);
/// the edge itself is where the first difference, extrapolated from the
/// trading side, reaches ∓Γ. Differences on each side use only nodes of that
/// side and are extrapolated quadratically to the edge.
fn column_jumps(vg: &ValueGrid, i: usize) -> Option<BoundaryJumps> {
    let vel = column(vg, i, &vg.velocity);
    let val = column(vg, i, &vg.value);
    let xi = &vg.mesh.xi;
    let g = vg.costs.gamma_lin;
    let (lo, hi) = nt_run(&vel, 0.0)?;
    let n = xi.len() as isize;
    let mut out = BoundaryJumps { second: 0.0, first: 0.0 };
    for (jb, dir, target) in [(hi as isize, 1isize, -g), (lo as isize, -1isize, g)] {
        // node k steps outward from the last no-trade node
        let at = |k: isize| (jb + dir * k) as usize;
        if jb - 5 < 0 || jb + 5 >= n {
            return None;
        }
        let d1 = |k: isize| {
            let (a, b) = (at(k), at(k + 1));
            (0.5 * (xi[a] + xi[b]), (val[b] - val[a]) / (xi[b] - xi[a]))
        };
        let d2 = |k: isize| {
            let j = at(k);
            let nodes = [xi[j - 1], xi[j], xi[j + 1]];
            let w = fd_weights(xi[j], &nodes, 2);
            (xi[j], w[2][0] * val[j - 1] + w[2][1] * val[j] + w[2][2] * val[j + 1])
        };
        let (q1, q2) = (d1(1), d1(2));
        let edge = (q1.0 + (target - q1.1) * (q2.0 - q1.0) / (q2.1 - q1.1))
            .clamp(xi[at(0)].min(xi[at(1)]), xi[at(0)].max(xi[at(1)]));
        let first = (extrapolate([d1(-1), d1(-2), d1(-3)], edge) - extrapolate([d1(1), d1(2), d1(3)], edge)).abs();
        let second = (extrapolate([d2(-1), d2(-2), d2(-3)], edge) - extrapolate([d2(2), d2(3), d2(4)], edge)).abs();
        out.second = out.second.max(second);
        out.first = out.first.max(first);
    }
    Some(out)
}

fn refinement_order(coarse: f64, fine: f64, ratio: f64) -> f64 {
    if coarse == 0.0 && fine == 0.0 {
        f64::INFINITY
    } else {
        (coarse / fine).ln() / ratio.ln()
    }
}

/// Two-grid study of the smoothness of V across the band edges. Grids must
/// share x-nodes; the refinement ratio is taken from their fine steps.
pub fn c2_continuity_check(coarse: &ValueGrid, fine: &ValueGrid) -> Result<ContinuityReport> {
    if coarse.mesh.x != fine.mesh.x {
        return Err(Error::Config("continuity check needs identical x-nodes".into()));
    }
    let ratio = coarse.mesh.fine_step / fine.mesh.fine_step;
    if !(ratio > 1.05) {
        return Err(Error::Config(format!("second grid is not finer (step ratio {ratio})")));
    }
    let nx = coarse.mesh.nx();
    let slopes: Vec<f64> = fine.band.theta_plus_deriv.iter().map(|d| d.abs()).filter(|d| d.is_finite()).collect();
    let mut sorted = slopes.clone();
    sorted.sort_by(f64::total_cmp);
    let typical = sorted.get(sorted.len() / 2).copied().unwrap_or(0.0);
    let near_collinear: Vec<bool> =
        fine.band.theta_plus_deriv.iter().map(|d| d.is_finite() && d.abs() < 0.1 * typical).collect();
    // edge columns carry the extrapolation condition, not the PDE
    let interior = |i: usize| i > 1 && i + 2 < nx;
    let cj: Vec<_> = (0..nx).map(|i| if interior(i) { column_jumps(coarse, i) } else { None }).collect();
    let fj: Vec<_> = (0..nx).map(|i| if interior(i) { column_jumps(fine, i) } else { None }).collect();
    let pick = |v: &[Option<BoundaryJumps>], f: fn(&BoundaryJumps) -> f64| {
        v.iter()
            .zip(&near_collinear)
            .filter_map(|(j, &nc)| if nc { None } else { j.as_ref().map(f) })
            .fold(0.0f64, f64::max)
    };
    let max_second = (pick(&cj, |j| j.second), pick(&fj, |j| j.second));
    let max_first = (pick(&cj, |j| j.first), pick(&fj, |j| j.first));
    let order_second = refinement_order(max_second.0, max_second.1, ratio);
    let order_first = refinement_order(max_first.0, max_first.1, ratio);
    let pass = order_second >= 1.0 && order_first >= 2.0;
    Ok(ContinuityReport {
        x: coarse.mesh.x.clone(),
        coarse: cj,
        fine: fj,
        near_collinear,
        max_second,
        max_first,
        order_second,
        order_first,
        pass,
    })
}
