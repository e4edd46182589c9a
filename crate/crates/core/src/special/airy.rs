//! Airy function Ai and its derivative on the real line.
//!
//! The Maclaurin series seeds a lattice of Taylor anchors on [−9, 6]; inside
//! that window Ai is evaluated from the nearest anchor, which avoids the
//! cancellation the raw series suffers for |u| ≳ 4. Poincaré asymptotic
//! expansions take over beyond u = 5 and below u = −8 (the oscillatory
//! expansion is only accurate to about e^{−2ζ}, so it needs the larger |u|).

use std::f64::consts::PI;
use std::sync::OnceLock;

use super::root::{find_root, RootBracket};

/// Ai(0) = 3^{-2/3}/Γ(2/3).
const AI0: f64 = 0.355_028_053_887_817_24;
/// −Ai′(0) = 3^{-1/3}/Γ(1/3).
const AIP0: f64 = 0.258_819_403_792_806_8;

/// Location of the first maximum of Ai, i.e. the largest zero of Ai′.
pub const AIRY_FIRST_MAX: f64 = -1.018_792_971_647_471;

/// Centres and half-width of the blending windows between series and asymptotics.
const SERIES_POS_MAX: f64 = 5.0;
const TAYLOR_NEG_MIN: f64 = -8.0;
const ANCHOR_STEP: f64 = 0.125;
const ANCHOR_MIN: f64 = -9.0;
const ANCHOR_MAX: f64 = 6.0;
const BLEND: f64 = 0.5;
const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Ai(u) and Ai′(u) from the Maclaurin series.
fn series(u: f64) -> (f64, f64) {
    let u3 = u * u * u;
    // f = Σ t_k, g = Σ s_k and their derivatives
    let (mut f, mut g) = (1.0, u);
    let (mut df, mut dg) = (0.0, 1.0);
    let (mut t, mut s) = (1.0, u);
    let (mut dt, mut ds) = (0.5 * u * u, 1.0);
    df += dt;
    for k in 0..200 {
        let k3 = 3.0 * k as f64;
        t *= u3 / ((k3 + 2.0) * (k3 + 3.0));
        s *= u3 / ((k3 + 3.0) * (k3 + 4.0));
        ds *= u3 / ((k3 + 1.0) * (k3 + 3.0));
        f += t;
        g += s;
        dg += ds;
        if k > 0 {
            dt *= u3 / (k3 * (k3 + 2.0));
            df += dt;
        }
        let scale = f.abs() + g.abs() + df.abs() + dg.abs();
        if t.abs() + s.abs() + dt.abs() + ds.abs() <= 1e-18 * scale && k > 2 {
            break;
        }
    }
    (AI0 * f - AIP0 * g, AI0 * df - AIP0 * dg)
}

/// Ai and Ai′ at u₀ + t from the Taylor expansion of y″ = u y about u₀.
fn taylor(u0: f64, a0: f64, a1: f64, t: f64) -> (f64, f64) {
    // (n+2)(n+1) a_{n+2} = u0 a_n + a_{n-1}
    let (mut am1, mut a, mut an1) = (0.0, a0, a1);
    let mut y = a0 + a1 * t;
    let mut dy = a1;
    let mut tp = t; // t^(n+1) for n = 0
    let mut tpd = 1.0; // t^n
    for n in 0..40usize {
        let nf = n as f64;
        let a2 = (u0 * a + am1) / ((nf + 2.0) * (nf + 1.0));
        tpd *= t;
        tp *= t;
        y += a2 * tp;
        dy += (nf + 2.0) * a2 * tpd;
        am1 = a;
        a = an1;
        an1 = a2;
    }
    (y, dy)
}

/// Anchors (u₀, Ai, Ai′) on a uniform lattice over [ANCHOR_MIN, ANCHOR_MAX].
/// Anchors with |u₀| ≤ 3 come straight from the Maclaurin series; the rest
/// are continued outward one Taylor step at a time.
fn anchors() -> &'static [(f64, f64, f64)] {
    static ANCHORS: OnceLock<Vec<(f64, f64, f64)>> = OnceLock::new();
    ANCHORS.get_or_init(|| {
        let n = ((ANCHOR_MAX - ANCHOR_MIN) / ANCHOR_STEP).round() as usize + 1;
        let u_at = |k: usize| ANCHOR_MIN + k as f64 * ANCHOR_STEP;
        let mut out: Vec<(f64, f64, f64)> = (0..n).map(|k| (u_at(k), f64::NAN, f64::NAN)).collect();
        for entry in out.iter_mut().filter(|e| e.0.abs() <= 3.0) {
            let (a, ap) = series(entry.0);
            entry.1 = a;
            entry.2 = ap;
        }
        let first = out.iter().position(|e| !e.1.is_nan()).unwrap();
        let last = out.iter().rposition(|e| !e.1.is_nan()).unwrap();
        for k in (0..first).rev() {
            let (u1, a, ap) = out[k + 1];
            let (na, nap) = taylor(u1, a, ap, -ANCHOR_STEP);
            out[k] = (u_at(k), na, nap);
        }
        for k in last + 1..n {
            let (u1, a, ap) = out[k - 1];
            let (na, nap) = taylor(u1, a, ap, ANCHOR_STEP);
            out[k] = (u_at(k), na, nap);
        }
        out
    })
}

fn taylor_local(u: f64) -> (f64, f64) {
    let table = anchors();
    let k = (((u - ANCHOR_MIN) / ANCHOR_STEP).round().max(0.0) as usize).min(table.len() - 1);
    let (u0, a, ap) = table[k];
    taylor(u0, a, ap, u - u0)
}

/// Coefficients u_k, v_k of the Airy asymptotic expansions.
fn asym_coeffs(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut uk = vec![1.0; n];
    let mut vk = vec![1.0; n];
    for k in 1..n {
        let kf = k as f64;
        uk[k] = uk[k - 1] * (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0)
            / ((2.0 * kf - 1.0) * 216.0 * kf);
        vk[k] = -(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * uk[k];
    }
    (uk, vk)
}

/// Partial sums Σ(−1)^k c_k ζ^{-k}, truncated before the terms start to grow.
fn alternating_sum(c: &[f64], zeta: f64, parity: Option<usize>) -> f64 {
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut pow = 1.0;
    let mut idx = 0usize;
    for (k, &ck) in c.iter().enumerate() {
        if k > 0 {
            pow /= zeta;
        }
        if let Some(p) = parity {
            if k % 2 != p {
                continue;
            }
        }
        let term = ck * pow;
        if term.abs() > prev {
            break;
        }
        prev = term.abs();
        let sign = if idx.is_multiple_of(2) { 1.0 } else { -1.0 };
        sum += sign * term;
        idx += 1;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Σ(−1)^k c_k ζ^{-k} over all k (decaying branch).
fn decaying_sum(c: &[f64], zeta: f64) -> f64 {
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut pow = 1.0;
    for (k, &ck) in c.iter().enumerate() {
        if k > 0 {
            pow /= zeta;
        }
        let term = ck * pow;
        if term.abs() > prev {
            break;
        }
        prev = term.abs();
        sum += if k % 2 == 0 { term } else { -term };
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// (L_u, L_v) sums and ζ for u > 0.
fn positive_sums(u: f64) -> (f64, f64, f64) {
    let zeta = 2.0 / 3.0 * u * u.sqrt();
    let (uk, vk) = asym_coeffs(40);
    (decaying_sum(&uk, zeta), decaying_sum(&vk, zeta), zeta)
}

fn asymptotic_positive(u: f64) -> (f64, f64) {
    let (su, sv, zeta) = positive_sums(u);
    let q = u.sqrt().sqrt();
    let e = (-zeta).exp() / (2.0 * SQRT_PI);
    (e / q * su, -e * q * sv)
}

fn asymptotic_negative(u: f64) -> (f64, f64) {
    let x = -u;
    let zeta = 2.0 / 3.0 * x * x.sqrt();
    let (uk, vk) = asym_coeffs(40);
    let ue = alternating_sum(&uk, zeta, Some(0));
    let uo = alternating_sum(&uk, zeta, Some(1));
    let ve = alternating_sum(&vk, zeta, Some(0));
    let vo = alternating_sum(&vk, zeta, Some(1));
    let phase = zeta - PI / 4.0;
    let (s, c) = phase.sin_cos();
    let q = x.sqrt().sqrt();
    let ai = (c * ue + s * uo) / (SQRT_PI * q);
    let aip = q / SQRT_PI * (s * ve - c * vo);
    (ai, aip)
}

/// Quintic smoothstep weight rising from 0 at `c − BLEND` to 1 at `c + BLEND`.
fn smoothstep(u: f64, c: f64) -> f64 {
    let s = ((u - c) / (2.0 * BLEND) + 0.5).clamp(0.0, 1.0);
    s * s * s * (s * (6.0 * s - 15.0) + 10.0)
}

fn blend(w: f64, a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    ((1.0 - w) * a.0 + w * b.0, (1.0 - w) * a.1 + w * b.1)
}

// The branches agree to ~1e-11 inside each window; blending keeps the
// result smooth so that finite differences of Ai stay clean.
fn ai_pair(u: f64) -> (f64, f64) {
    if u.is_nan() {
        (f64::NAN, f64::NAN)
    } else if u >= SERIES_POS_MAX + BLEND {
        asymptotic_positive(u)
    } else if u <= TAYLOR_NEG_MIN - BLEND {
        asymptotic_negative(u)
    } else if u > SERIES_POS_MAX - BLEND {
        blend(smoothstep(u, SERIES_POS_MAX), taylor_local(u), asymptotic_positive(u))
    } else if u < TAYLOR_NEG_MIN + BLEND {
        blend(smoothstep(u, TAYLOR_NEG_MIN), asymptotic_negative(u), taylor_local(u))
    } else {
        taylor_local(u)
    }
}

/// Airy function of the first kind.
pub fn airy_ai(u: f64) -> f64 {
    ai_pair(u).0
}

/// Derivative Ai′(u).
pub fn airy_ai_prime(u: f64) -> f64 {
    ai_pair(u).1
}

/// Ai′(u)/Ai(u), evaluated without underflow for large positive u.
pub fn airy_log_derivative(u: f64) -> f64 {
    if u >= SERIES_POS_MAX + BLEND {
        let (su, sv, _) = positive_sums(u);
        -u.sqrt() * sv / su
    } else {
        let (a, ap) = ai_pair(u);
        ap / a
    }
}

/// First maximum of Ai (largest root of Ai′) located by bracketed root finding.
pub fn airy_first_max() -> f64 {
    find_root(airy_ai_prime, RootBracket { lo: -2.0, hi: 0.0, tol: 1e-15 })
        .expect("Ai' changes sign on (-2, 0)")
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from a 30-digit evaluation.
    const TABLE: &[(f64, f64, f64)] = &[
        (0.0, 0.355_028_053_887_817_24, -0.258_819_403_792_806_8),
        (1.0, 0.135_292_416_312_881_42, -0.159_147_441_296_793_2),
        (2.0, 0.034_924_130_423_274_38, -0.053_090_384_433_653_63),
        (4.5, 3.302_503_235_143_09e-4, -7.178_665_675_575_089e-4),
        (5.0, 1.083_444_281_360_744_2e-4, -2.474_138_908_684_625e-4),
        (5.5, 3.368_531_190_859_981_4e-5, -8.046_339_130_556_514e-5),
        (8.0, 4.692_207_616_099_232e-8, -1.341_439_297_906_786_6e-7),
        (-1.0, 0.535_560_883_292_352_1, -0.010_160_567_116_645_21),
        (-3.0, -0.378_814_293_677_658_1, 0.314_583_769_216_598_8),
        (-4.5, 0.292_152_781_055_959_47, -0.523_362_532_315_747_7),
        (-5.0, 0.350_761_009_024_114_3, 0.327_192_818_554_443_1),
        (-5.5, 0.017_781_541_276_574_976, 0.864_197_217_771_398_4),
        (-7.0, 0.184_280_835_250_505_64, -0.771_008_168_410_126_5),
        (-10.0, 0.040_241_238_486_443_19, 0.996_265_044_132_790_1),
        (-15.0, 0.278_217_490_870_828_9, 0.272_374_204_308_642),
    ];

    #[test]
    fn matches_reference_table() {
        for &(u, ai, aip) in TABLE {
            assert!((airy_ai(u) - ai).abs() < 1e-10, "Ai({u}) = {} vs {ai}", airy_ai(u));
            assert!((airy_ai_prime(u) - aip).abs() < 1e-10, "Ai'({u}) = {} vs {aip}", airy_ai_prime(u));
        }
    }

    #[test]
    fn values_at_origin() {
        assert!((airy_ai(0.0) - 0.3550280539).abs() < 1e-10);
        assert!((airy_ai_prime(0.0) + 0.2588194038).abs() < 1e-10);
    }

    #[test]
    fn branches_agree_on_crossover() {
        for i in 0..=20 {
            let u = 4.5 + 0.05 * i as f64;
            let (a, ap) = taylor_local(u);
            let (b, bp) = asymptotic_positive(u);
            assert!((a - b).abs() < 1e-9 && (ap - bp).abs() < 1e-9, "u={u}");
        }
        for i in 0..=20 {
            let u = -8.5 + 0.05 * i as f64;
            let (a, ap) = taylor_local(u);
            let (b, bp) = asymptotic_negative(u);
            assert!((a - b).abs() < 1e-9 && (ap - bp).abs() < 1e-9, "u={u}");
        }
    }

    #[test]
    fn taylor_lattice_matches_series() {
        for i in 0..=120 {
            let u = -3.0 + 0.05 * i as f64;
            let (a, ap) = series(u);
            let (b, bp) = taylor_local(u);
            assert!((a - b).abs() < 1e-11 && (ap - bp).abs() < 1e-11, "u={u}");
        }
    }

    #[test]
    fn log_decay_at_large_argument() {
        let u = 8.0f64;
        let lhs = airy_ai(u).ln();
        let lead = -2.0 / 3.0 * u.powf(1.5);
        let full = lead - 0.25 * u.ln() - (2.0 * SQRT_PI).ln();
        assert!((lhs - full).abs() < 1e-2);
        assert!((lhs / lead - 1.0).abs() < 0.15);
    }

    #[test]
    fn satisfies_airy_ode() {
        let h = 1e-4;
        for i in 0..=150 {
            let u = -10.0 + 0.1 * i as f64;
            let d2 = (airy_ai(u + h) - 2.0 * airy_ai(u) + airy_ai(u - h)) / (h * h);
            assert!((d2 - u * airy_ai(u)).abs() < 1e-6, "u={u}: {d2} vs {}", u * airy_ai(u));
        }
    }

    #[test]
    fn derivative_matches_richardson() {
        let u = -1.0;
        let d = |h: f64| (airy_ai(u + h) - airy_ai(u - h)) / (2.0 * h);
        let rich = (4.0 * d(1e-3) - d(2e-3)) / 3.0;
        assert!((rich - airy_ai_prime(u)).abs() < 1e-8);
    }

    #[test]
    fn first_maximum() {
        let u = airy_first_max();
        assert!((u - (-1.0187929716)).abs() < 1e-10);
        assert!((u - AIRY_FIRST_MAX).abs() < 1e-12);
        assert!(airy_ai(u) > 0.0);
    }

    #[test]
    fn positive_beyond_first_max_and_derivative_negative() {
        for i in 1..2000 {
            let u = AIRY_FIRST_MAX + 0.005 * i as f64;
            assert!(airy_ai(u) > 0.0);
            assert!(airy_ai_prime(u) < 0.0, "u={u}");
        }
    }

    #[test]
    fn log_derivative_continuous_and_asymptotic() {
        let a = airy_log_derivative(5.5 - 1e-9);
        let b = airy_log_derivative(5.5 + 1e-9);
        assert!((a - b).abs() < 1e-6);
        let u = 400.0f64;
        assert!((airy_log_derivative(u) / -u.sqrt() - 1.0).abs() < 1e-3);
    }
}
