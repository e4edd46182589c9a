//! Dormand–Prince 5(4) integrator with embedded error control.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen automatically when zero.
    pub h_init: f64,
    /// Largest allowed step magnitude (infinite by default).
    pub h_max: f64,
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        OdeOptions { rtol: tol, atol: tol, h_init: 0.0, h_max: f64::INFINITY, max_steps: 1_000_000 }
    }
}

/// Accepted states of an integration, in integration order.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn last(&self) -> (f64, &[f64]) {
        let n = self.t.len() - 1;
        (self.t[n], &self.y[n])
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct Stepper {
    k: Vec<Vec<f64>>,
    tmp: Vec<f64>,
}

impl Stepper {
    fn new(n: usize) -> Self {
        Stepper { k: vec![vec![0.0; n]; 7], tmp: vec![0.0; n] }
    }

    /// One step from (t, y); writes the 5th-order solution into `out`, returns the error estimate vector in tmp.
    fn step<F: FnMut(f64, &[f64], &mut [f64])>(&mut self, rhs: &mut F, t: f64, y: &[f64], h: f64, out: &mut [f64]) {
        let n = y.len();
        rhs(t, y, &mut self.k[0]);
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for j in 0..s {
                    acc += h * A[s][j] * self.k[j][i];
                }
                self.tmp[i] = acc;
            }
            let (head, tail) = self.k.split_at_mut(s);
            let _ = head;
            rhs(t + C[s] * h, &self.tmp, &mut tail[0]);
        }
        for i in 0..n {
            let mut y5 = y[i];
            let mut err = 0.0;
            for s in 0..7 {
                y5 += h * B5[s] * self.k[s][i];
                err += h * (B5[s] - B4[s]) * self.k[s][i];
            }
            out[i] = y5;
            self.tmp[i] = err;
        }
    }
}

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], opts: &OdeOptions) -> f64 {
    err.iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| e.abs() / (opts.atol + opts.rtol * a.abs().max(b.abs())))
        .fold(0.0, f64::max)
}

/// Integrates `y' = rhs(t, y)` from `t0` to `t_end` (either direction) and
/// stops exactly at each of `points`, which must be ordered along the
/// direction of integration. Returns the states at `points`.
pub fn integrate_ode_at<F>(mut rhs: F, t0: f64, y0: &[f64], points: &[f64], opts: OdeOptions) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let mut out = Trajectory::default();
    if points.is_empty() {
        return Ok(out);
    }
    let dir = if points[points.len() - 1] >= t0 { 1.0 } else { -1.0 };
    let mut stepper = Stepper::new(n);
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut y_new = vec![0.0; n];
    let span = (points[points.len() - 1] - t0).abs().max(f64::MIN_POSITIVE);
    let mut h = if opts.h_init > 0.0 { opts.h_init } else { (span * 1e-3).min(opts.h_max) };
    let mut steps = 0usize;
    for &target in points {
        while (target - t) * dir > 0.0 {
            if steps >= opts.max_steps {
                return Err(Error::NonConvergence { iterations: steps, residual: (target - t).abs() });
            }
            let remaining = (target - t).abs();
            let hh = h.min(remaining).min(opts.h_max);
            let last = hh >= remaining * (1.0 - 1e-12);
            let hh = if last { remaining } else { hh };
            if hh < 1e-14 * t.abs().max(span) {
                return Err(Error::Stiff { t, h: hh });
            }
            stepper.step(&mut rhs, t, &y, dir * hh, &mut y_new);
            let err = error_norm(&stepper.tmp, &y, &y_new, &opts);
            steps += 1;
            if err <= 1.0 && y_new.iter().all(|v| v.is_finite()) {
                t = if last { target } else { t + dir * hh };
                y.copy_from_slice(&y_new);
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || fac < 1.0 {
                    h = hh * fac;
                }
            } else {
                let fac = if err.is_finite() { (0.9 * err.powf(-0.25)).clamp(0.1, 0.5) } else { 0.1 };
                h = hh * fac;
            }
        }
        out.t.push(t);
        out.y.push(y.clone());
    }
    Ok(out)
}

/// Adaptive integration over `span`, returning every accepted step.
pub fn integrate_ode<F>(mut rhs: F, y0: &[f64], span: (f64, f64), tol: f64) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let opts = OdeOptions::with_tol(tol);
    let (t0, t1) = span;
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let n = y0.len();
    let mut stepper = Stepper::new(n);
    let mut traj = Trajectory { t: vec![t0], y: vec![y0.to_vec()] };
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut y_new = vec![0.0; n];
    let span_len = (t1 - t0).abs();
    let mut h = (span_len * 1e-3).max(f64::MIN_POSITIVE);
    let mut steps = 0usize;
    while (t1 - t) * dir > 0.0 {
        if steps >= opts.max_steps {
            return Err(Error::NonConvergence { iterations: steps, residual: (t1 - t).abs() });
        }
        let remaining = (t1 - t).abs();
        let last = h >= remaining * (1.0 - 1e-12);
        let hh = if last { remaining } else { h };
        if hh < 1e-14 * t.abs().max(span_len) {
            return Err(Error::Stiff { t, h: hh });
        }
        stepper.step(&mut rhs, t, &y, dir * hh, &mut y_new);
        let err = error_norm(&stepper.tmp, &y, &y_new, &opts);
        steps += 1;
        if err <= 1.0 && y_new.iter().all(|v| v.is_finite()) {
            t = if last { t1 } else { t + dir * hh };
            y.copy_from_slice(&y_new);
            traj.t.push(t);
            traj.y.push(y.clone());
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = hh * fac;
        } else {
            let fac = if err.is_finite() { (0.9 * err.powf(-0.25)).clamp(0.1, 0.5) } else { 0.1 };
            h = hh * fac;
        }
    }
    Ok(traj)
}

/// Fixed-step Dormand–Prince (fifth-order solution), used for convergence-order studies.
pub fn integrate_fixed<F>(mut rhs: F, y0: &[f64], span: (f64, f64), n_steps: usize) -> Vec<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let mut stepper = Stepper::new(n);
    let h = (span.1 - span.0) / n_steps as f64;
    let mut y = y0.to_vec();
    let mut y_new = vec![0.0; n];
    for s in 0..n_steps {
        stepper.step(&mut rhs, span.0 + s as f64 * h, &y, h, &mut y_new);
        y.copy_from_slice(&y_new);
    }
    y
}
