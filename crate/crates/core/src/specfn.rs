//! Scalar special functions on the positive half-line.
//!
//! | Function      | Method                                                        |
//! |---------------|---------------------------------------------------------------|
//! | [`ln_gamma`]  | Taylor series about 1 and 2, Lanczos on `[2.5, 10)`, Stirling |
//! | [`ln_beta`]   | Stirling-difference form when an argument is large            |
//! | [`digamma`]   | upward recurrence to `x >= 6`, then asymptotic series         |
//! | [`trigamma`]  | upward recurrence to `x >= 6`, then asymptotic series         |
//!
//! Every function rejects `x <= 0` and non-finite input with [`Error::Domain`].

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_6;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_741_8;

/// Below this the digamma/trigamma recurrences shift the argument upward.
const ASYMPTOTIC_THRESHOLD: f64 = 10.0;

const STIRLING_THRESHOLD: f64 = 10.0;

/// Number of terms of the `zeta(k) - 1` series used near 1 and 2.
const ZETA_TERMS: usize = 40;

// Lanczos approximation, g = 671/128, 14 terms (Numerical Recipes, 3rd ed.).
const LANCZOS_G_HALF: f64 = 5.242_187_5;
const LANCZOS_C0: f64 = 0.999_999_999_999_997_092;
const LANCZOS_COEF: [f64; 14] = [
    57.156_235_665_862_923_5,
    -59.597_960_355_475_491_2,
    14.136_097_974_741_747_1,
    -0.491_913_816_097_620_199,
    0.339_946_499_848_118_887e-4,
    0.465_236_289_270_485_756e-4,
    -0.983_744_753_048_795_646e-4,
    0.158_088_703_224_912_494e-3,
    -0.210_264_441_724_104_883e-3,
    0.217_439_618_115_212_643e-3,
    -0.164_318_106_536_763_890e-3,
    0.844_182_239_838_527_433e-4,
    -0.261_908_384_015_814_087e-4,
    0.368_991_826_595_316_234e-5,
];

// B_{2k} / (2k (2k-1)) for k = 1..=8.
const STIRLING_COEF: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

// B_{2k} / (2k) for k = 1..=7.
const DIGAMMA_COEF: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32_760.0,
    1.0 / 12.0,
];

// B_{2k} for k = 1..=7.
const TRIGAMMA_COEF: [f64; 7] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
];

#[inline]
fn check(func: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(func, format!("argument must be finite and > 0, got {x}")))
    }
}

/// `zeta(k) - 1` for `k = 2..ZETA_TERMS+2`, via partial sums plus an
/// Euler–Maclaurin tail.
fn zeta_minus_one() -> &'static [f64; ZETA_TERMS] {
    static TABLE: OnceLock<[f64; ZETA_TERMS]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut out = [0.0; ZETA_TERMS];
        let n = 40.0_f64;
        for (i, slot) in out.iter_mut().enumerate() {
            let k = (i + 2) as f64;
            // sum small terms first
            let mut head = 0.0;
            for m in (2..40).rev() {
                head += (m as f64).powf(-k);
            }
            let tail = n.powf(1.0 - k) / (k - 1.0) + 0.5 * n.powf(-k) + k * n.powf(-k - 1.0) / 12.0
                - k * (k + 1.0) * (k + 2.0) * n.powf(-k - 3.0) / 720.0
                + k * (k + 1.0) * (k + 2.0) * (k + 3.0) * (k + 4.0) * n.powf(-k - 5.0) / 30_240.0;
            *slot = head + tail;
        }
        out
    })
}

/// `ln Γ(1 + e) + ln(1 + e)` for `|e| <= 0.5`.
///
/// Equals `e (1 - γ) + Σ_{k≥2} (-1)^k (ζ(k) - 1) e^k / k`, which vanishes at
/// `e = 0` without cancellation.
fn ln_gamma1p_plus_ln1p(e: f64) -> f64 {
    let zm1 = zeta_minus_one();
    let mut sum = 0.0;
    for i in (0..ZETA_TERMS).rev() {
        let k = (i + 2) as f64;
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        sum = sum * e + sign * zm1[i] / k;
    }
    e * (1.0 - EULER_GAMMA) + sum * e * e
}

fn lanczos(x: f64) -> f64 {
    let tmp = x + LANCZOS_G_HALF;
    let tmp = (x + 0.5) * tmp.ln() - tmp;
    let mut ser = LANCZOS_C0;
    let mut y = x;
    for c in LANCZOS_COEF {
        y += 1.0;
        ser += c / y;
    }
    tmp + (2.506_628_274_631_000_5 * ser / x).ln()
}

/// `ln Γ(x) - [(x - 1/2) ln x - x + ln √(2π)]` for `x >= 10`.
pub(crate) fn stirling_correction(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut acc = 0.0;
    for c in STIRLING_COEF.iter().rev() {
        acc = acc * inv2 + c;
    }
    acc * inv
}

fn ln_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        ln_gamma1p_plus_ln1p(x) - x.ln_1p() - x.ln()
    } else if x < 1.5 {
        let e = x - 1.0;
        ln_gamma1p_plus_ln1p(e) - e.ln_1p()
    } else if x < 2.5 {
        // ln Γ(2 + e) = ln(1 + e) + ln Γ(1 + e)
        ln_gamma1p_plus_ln1p(x - 2.0)
    } else if x < STIRLING_THRESHOLD {
        lanczos(x)
    } else {
        (x - 0.5) * x.ln() - x + LN_SQRT_2PI + stirling_correction(x)
    }
}

/// Natural log of the gamma function.
pub fn ln_gamma(x: f64) -> Result<f64> {
    check("ln_gamma", x)?;
    Ok(ln_gamma_unchecked(x))
}

/// `ln B(a, b) = ln Γ(a) + ln Γ(b) - ln Γ(a + b)`.
///
/// The arguments are ordered internally, so `ln_beta(a, b)` and
/// `ln_beta(b, a)` are bit-identical.
pub fn ln_beta(a: f64, b: f64) -> Result<f64> {
    check("ln_beta", a)?;
    check("ln_beta", b)?;
    let (p, q) = if a <= b { (a, b) } else { (b, a) };
    let sum = p + q;
    let out = if p >= STIRLING_THRESHOLD {
        let corr = stirling_correction(p) + stirling_correction(q) - stirling_correction(sum);
        -0.5 * q.ln() + LN_SQRT_2PI + corr + (p - 0.5) * (p / sum).ln() + q * (-p / sum).ln_1p()
    } else if q >= STIRLING_THRESHOLD {
        let corr = stirling_correction(q) - stirling_correction(sum);
        ln_gamma_unchecked(p) + corr + p - p * sum.ln() + (q - 0.5) * (-p / sum).ln_1p()
    } else {
        ln_gamma_unchecked(p) + ln_gamma_unchecked(q) - ln_gamma_unchecked(sum)
    };
    Ok(out)
}

/// Digamma function `ψ(x) = d/dx ln Γ(x)`.
pub fn digamma(x: f64) -> Result<f64> {
    check("digamma", x)?;
    let mut x = x;
    let mut shift = 0.0;
    while x < ASYMPTOTIC_THRESHOLD {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    let mut series = 0.0;
    for c in DIGAMMA_COEF.iter().rev() {
        series = series * inv2 + c;
    }
    Ok(shift + x.ln() - 0.5 / x - series * inv2)
}

/// Trigamma function `ψ'(x)`.
pub fn trigamma(x: f64) -> Result<f64> {
    check("trigamma", x)?;
    let mut x = x;
    let mut shift = 0.0;
    while x < ASYMPTOTIC_THRESHOLD {
        shift += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut series = 0.0;
    for c in TRIGAMMA_COEF.iter().rev() {
        series = series * inv2 + c;
    }
    Ok(shift + inv + 0.5 * inv2 + series * inv2 * inv)
}

/// `π² / 6`, handy for tests and callers.
pub const ZETA2: f64 = PI * PI / 6.0;
