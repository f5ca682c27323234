//! Test-only oracles that do not share code with the crate: adaptive
//! Gauss–Kronrod quadrature, a logit-space beta integrator, and beta CDFs
//! from `statrs`.
#![allow(dead_code)]

use statrs::distribution::{Beta, ContinuousCDF};
use statrs::function::gamma::ln_gamma as sr_ln_gamma;

// 15-point Kronrod nodes on [0, 1] (symmetric), with the embedded 7-point
// Gauss weights on the odd-indexed nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

struct Piece {
    lo: f64,
    hi: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Globally adaptive G7–K15 on `[a, b]`: bisect the piece with the largest
/// error estimate until the summed estimate is below
/// `max(abs_tol, rel_tol·|I|)` or 2000 pieces are in use.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    let piece = |lo: f64, hi: f64| {
        let (value, err) = gk15(&f, lo, hi);
        Piece { lo, hi, value, err }
    };
    let pieces = 16;
    let w = (b - a) / pieces as f64;
    let mut heap: std::collections::BinaryHeap<Piece> =
        (0..pieces).map(|i| piece(a + w * i as f64, a + w * (i + 1) as f64)).collect();
    let (mut total, mut err) = heap.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.value, acc.1 + p.err));
    while err > abs_tol.max(rel_tol * f64::abs(total)) && heap.len() < 2000 {
        let worst = heap.pop().unwrap();
        let m = 0.5 * (worst.lo + worst.hi);
        let (l, r) = (piece(worst.lo, m), piece(m, worst.hi));
        total += l.value + r.value - worst.value;
        err += l.err + r.err - worst.err;
        heap.push(l);
        heap.push(r);
    }
    // fresh sum, free of the running total's drift
    heap.iter().map(|p| p.value).sum()
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `ln B(a, b)` from `statrs`' Lanczos `ln Γ`.
pub fn ref_ln_beta(a: f64, b: f64) -> f64 {
    sr_ln_gamma(a) + sr_ln_gamma(b) - sr_ln_gamma(a + b)
}

/// `E[g(ln x, ln(1-x))]` for `x ~ Beta(a, b)`, integrated over `u = logit(x)`
/// where the density is smooth and unimodal.
pub fn beta_expect<G: Fn(f64, f64) -> f64>(a: f64, b: f64, g: G) -> f64 {
    let ln_b = ref_ln_beta(a, b);
    // density of u: exp(a ln x + b ln(1-x) - ln B)
    let dens = |u: f64| {
        let lx = -softplus(-u);
        let l1x = -softplus(u);
        ((a * lx + b * l1x - ln_b).exp(), lx, l1x)
    };
    let mode = (a / b).ln();
    let sd = (1.0 / a + 1.0 / b).sqrt();
    let lo = mode - 45.0 / a - 40.0 * sd;
    let hi = mode + 45.0 / b + 40.0 * sd;
    // split at the mode so each side is monotone
    let f = |u: f64| {
        let (p, lx, l1x) = dens(u);
        if p == 0.0 {
            0.0
        } else {
            p * g(lx, l1x)
        }
    };
    let norm = |u: f64| dens(u).0;
    let z = integrate(norm, lo, mode, 1e-16, 1e-13) + integrate(norm, mode, hi, 1e-16, 1e-13);
    let v = integrate(f, lo, mode, 1e-16, 1e-13) + integrate(f, mode, hi, 1e-16, 1e-13);
    v / z
}

/// `KL(Beta(ap, bp) || Beta(aq, bq))` as `∫ p ln(p/q)`, with the log-ratio
/// expanded into its `ln x` and `ln(1-x)` parts before integrating.
pub fn quadrature_kl_beta(ap: f64, bp: f64, aq: f64, bq: f64) -> f64 {
    kl_from_log_moments(ap, bp, beta_log_moments(ap, bp), aq, bq)
}

/// `(E[ln x], E[ln(1-x)])` under `Beta(a, b)` by quadrature.
pub fn beta_log_moments(a: f64, b: f64) -> (f64, f64) {
    (beta_expect(a, b, |lx, _| lx), beta_expect(a, b, |_, l1x| l1x))
}

pub fn kl_from_log_moments(ap: f64, bp: f64, moments: (f64, f64), aq: f64, bq: f64) -> f64 {
    (ap - aq) * moments.0 + (bp - bq) * moments.1 - ref_ln_beta(ap, bp) + ref_ln_beta(aq, bq)
}

/// `I_x(a, b) = x^a / B(a, b) · Σ_n (1-b)_n x^n / (n! (a + n))`, accurate for
/// small `x`.
fn beta_cdf_series(a: f64, b: f64, x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0 / a;
    for n in 1..60 {
        term *= (n as f64 - b) * x / n as f64;
        let add = term / (a + n as f64);
        sum += add;
        if add.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    (a * x.ln() - ref_ln_beta(a, b) + sum.ln()).exp()
}

/// Beta CDF: `statrs`, except below `1e-8` where `statrs` rounds the
/// prefactor to zero and the power series is used instead.
pub fn beta_cdf(a: f64, b: f64) -> impl Fn(f64) -> f64 {
    let d = Beta::new(a, b).expect("valid beta shapes");
    move |x| {
        if x > 0.0 && x < 1e-8 {
            beta_cdf_series(a, b, x)
        } else {
            d.cdf(x)
        }
    }
}

/// CDF of `logit(x)` for `x ~ Beta(a, b)`. Each half is evaluated through
/// its own small tail, so neither end loses precision to rounding near 1.
pub fn beta_logit_cdf(a: f64, b: f64) -> impl Fn(f64) -> f64 {
    let lower = beta_cdf(a, b);
    let upper = beta_cdf(b, a);
    move |l| {
        if l <= 0.0 {
            lower(1.0 / (1.0 + (-l).exp()))
        } else {
            1.0 - upper(1.0 / (1.0 + l.exp()))
        }
    }
}

/// Standard normal CDF from `statrs`.
pub fn normal_cdf(mean: f64, sd: f64) -> impl Fn(f64) -> f64 {
    let d = statrs::distribution::Normal::new(mean, sd).expect("valid normal");
    move |x| d.cdf(x)
}

/// Reads `function,x,value` rows of the checked-in special-function table.
pub fn specfn_reference() -> Vec<(String, f64, f64)> {
    let text = include_str!("../data/specfn_reference.csv");
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let mut it = l.split(',');
            let f = it.next().unwrap().to_string();
            let x: f64 = it.next().unwrap().parse().unwrap();
            let v: f64 = it.next().unwrap().parse().unwrap();
            (f, x, v)
        })
        .collect()
}

/// Relative error with the reference as denominator.
pub fn rel_err(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        ((got - want) / want).abs()
    }
}
