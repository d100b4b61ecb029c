//! Normal distribution functions, probabilists' Hermite polynomials and the
//! gamma-family special functions used by the Dirichlet models.
//!
//! The Hermite polynomials here follow the probabilists' convention
//! `φ⁽ⁿ⁾(x) = (−1)ⁿ Heₙ(x) φ(x)`, so `He₂(x) = x² − 1`. The physicists'
//! polynomials (`H₂(x) = 4x² − 2`) are *not* what the Edgeworth corrections use.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// 1/√(2π)
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_677_939_946_059_934_381_868;
/// 2/√π
const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// Below this argument erfc is computed as `1 − erf` from the power series;
/// above it the continued fraction converges quickly.
const ERFC_SERIES_CUTOFF: f64 = 2.0;

/// Highest Hermite order supported by [`hermite`].
pub const MAX_HERMITE_ORDER: usize = 6;

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF Φ(x), relative accuracy around 1e−13 over the whole line.
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("normal cdf argument {x} is not finite")));
    }
    Ok(norm_cdf(x))
}

/// Unchecked Φ for internal use; NaN propagates.
pub(crate) fn norm_cdf(x: f64) -> f64 {
    if x < -MILLS_CUTOFF {
        lower_tail(-x)
    } else if x > MILLS_CUTOFF {
        1.0 - lower_tail(x)
    } else {
        0.5 * erfc(-x * FRAC_1_SQRT_2)
    }
}

/// Beyond this |x| the normal tail goes through the Mills ratio directly,
/// which avoids the rounding of x/√2 being amplified by the exponential.
const MILLS_CUTOFF: f64 = 3.0;

/// Φ(−t) = φ(t)·R(t) for t > 0, with the Mills ratio
/// R(t) = 1/(t + 1/(t + 2/(t + 3/(t + …)))).
fn lower_tail(t: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = t;
    let mut c = t;
    let mut d = 0.0;
    for k in 1..5000 {
        let a = f64::from(k);
        d = t + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = t + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    FRAC_1_SQRT_2PI * exp_neg_half_square(t) / f
}

/// e^{−t²/2} with t split so the large part of t² is exact.
fn exp_neg_half_square(t: f64) -> f64 {
    let hi = (t * 16.0).trunc() / 16.0;
    let lo = t - hi;
    (-0.5 * hi * hi).exp() * (-0.5 * lo * (t + hi)).exp()
}

/// Complementary error function with full relative accuracy in both tails.
pub fn erfc(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z < 0.0 {
        return 2.0 - erfc(-z);
    }
    if z < ERFC_SERIES_CUTOFF {
        1.0 - erf_series(z)
    } else {
        erfc_continued_fraction(z)
    }
}

/// erf(z) = 2/√π · e^{−z²} · Σ (2z²)ⁿ z / (2n+1)!!, every term positive.
fn erf_series(z: f64) -> f64 {
    let two_z2 = 2.0 * z * z;
    let mut term = z;
    let mut sum = z;
    let mut n = 0u32;
    loop {
        n += 1;
        term *= two_z2 / f64::from(2 * n + 1);
        sum += term;
        if term <= sum * 1e-17 || n > 500 {
            break;
        }
    }
    FRAC_2_SQRT_PI * (-z * z).exp() * sum
}

/// erfc(z) = e^{−z²}/√π · 1/(z + ½/(z + 1/(z + 3/2/(z + …)))) via modified Lentz.
fn erfc_continued_fraction(z: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = z;
    let mut c = z;
    let mut d = 0.0;
    for k in 1..2000 {
        let a = f64::from(k) * 0.5;
        d = z + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = z + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    exp_neg_half_square(z * std::f64::consts::SQRT_2) / (PI.sqrt() * f)
}

/// Standard normal quantile Φ⁻¹(p) for p in (0, 1).
///
/// A rational first guess is refined by Halley steps inside a maintained
/// bracket; a step that escapes the bracket falls back to bisection.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("normal quantile needs p in (0,1), got {p}")));
    }
    Ok(norm_quantile(p))
}

pub(crate) fn norm_quantile(p: f64) -> f64 {
    if p > 0.5 {
        // 1 − p is exact on [0.5, 1]
        return -lower_quantile(1.0 - p);
    }
    lower_quantile(p)
}

fn lower_quantile(p: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    // Newton on ln Φ(x) = ln p; ln Φ is concave so the iteration is monotone
    // once it has stepped past the root, and log space keeps far tails exact.
    let (mut lo, mut hi) = (-40.0_f64, 0.0_f64);
    let target = p.ln();
    let mut x = quantile_guess(p).clamp(lo, hi);
    for _ in 0..100 {
        let cdf = norm_cdf(x);
        let err = cdf.ln() - target;
        if err == 0.0 {
            return x;
        }
        if err < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = x - err * cdf / std_normal_pdf(x);
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * (1.0 + x.abs()) {
            return next;
        }
        x = next;
    }
    x
}

/// Acklam's rational approximation, relative error about 1e−9.
fn quantile_guess(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_690e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Probabilists' Hermite polynomial Heₖ(x) for k ≤ 6.
pub fn hermite(k: usize, x: f64) -> Result<f64> {
    if k > MAX_HERMITE_ORDER {
        return Err(Error::Domain(format!(
            "Hermite order {k} exceeds supported maximum {MAX_HERMITE_ORDER}"
        )));
    }
    Ok(hermite_unchecked(k, x))
}

pub(crate) fn hermite_unchecked(k: usize, x: f64) -> f64 {
    let x2 = x * x;
    match k {
        0 => 1.0,
        1 => x,
        2 => x2 - 1.0,
        3 => x * (x2 - 3.0),
        4 => (x2 - 6.0) * x2 + 3.0,
        5 => x * ((x2 - 10.0) * x2 + 15.0),
        6 => ((x2 - 15.0) * x2 + 45.0) * x2 - 15.0,
        _ => unreachable!("order checked by caller"),
    }
}

/// ln Γ(x) for x > 0 (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection: Γ(x)Γ(1−x) = π / sin(πx)
        return (PI / (PI * x).sin()).abs().ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Digamma ψ(x) for x > 0.
pub fn digamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    acc + x.ln() - 0.5 * inv
        - inv2
            * (1.0 / 12.0
                - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))))
}

/// Trigamma ψ′(x) for x > 0.
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 12.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    acc + inv
        + 0.5 * inv2
        + inv * inv2
            * (1.0 / 6.0
                - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * 5.0 / 66.0))))
}
