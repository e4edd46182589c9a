use crate::error::{Error, Result};

/// Search interval for a sign change, with absolute tolerance on the abscissa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootBracket {
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
}

impl RootBracket {
    pub fn new(lo: f64, hi: f64, tol: f64) -> Result<Self> {
        if !(lo < hi) || !(tol > 0.0) {
            return Err(Error::Config(format!("invalid bracket ({lo}, {hi}) tol {tol}")));
        }
        Ok(RootBracket { lo, hi, tol })
    }
}

/// Brent's method: inverse quadratic interpolation safeguarded by bisection.
pub fn find_root(mut f: impl FnMut(f64) -> f64, bracket: RootBracket) -> Result<f64> {
    let (mut a, mut b) = (bracket.lo, bracket.hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::Bracket { lo: a, hi: b, flo: fa, fhi: fb });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * bracket.tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_two() {
        let r = find_root(|u| u * u - 2.0, RootBracket::new(1.0, 2.0, 1e-14).unwrap()).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn identity_root() {
        let r = find_root(|u| u, RootBracket::new(-1.0, 1.0, 1e-14).unwrap()).unwrap();
        assert!(r.abs() < 1e-14);
    }

    #[test]
    fn airy_derivative_root() {
        let r = find_root(crate::special::airy_ai_prime, RootBracket::new(-2.0, 0.0, 1e-14).unwrap()).unwrap();
        assert!((r + 1.0187929716).abs() < 1e-10);
    }

    #[test]
    fn no_sign_change_is_an_error() {
        let e = find_root(|u| u * u + 1.0, RootBracket::new(-1.0, 1.0, 1e-12).unwrap());
        assert!(matches!(e, Err(Error::Bracket { .. })));
        assert!(RootBracket::new(1.0, 0.0, 1e-3).is_err());
    }
}
