//! KL divergence between beta distributions and the KLUB training losses.
//!
//! `KL(Beta(p) || Beta(q))` is the Bregman divergence of `ln B` with its
//! arguments in the order `(q, p)`:
//!
//! ```text
//! KL(p || q) = ln B(q) - ln B(p) - (a_q - a_p)[ψ(a_p) - ψ(a_p + b_p)]
//!                                - (b_q - b_p)[ψ(b_p) - ψ(a_p + b_p)]
//! ```
//!
//! The KLUB losses put the reverse (model) distribution first, so their
//! minimizer in `x̂0` is the posterior mean `E[x0 | z_t]`. The negative-ELBO
//! variant swaps both arguments and loses that property.

use std::fmt;
use std::str::FromStr;

use crate::chain::DiffusionConfig;
use crate::error::{Error, Result};
use crate::random::BetaParams;
use crate::specfn::{digamma, ln_beta, trigamma};

/// Which argument order the two Bregman terms use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LossVariant {
    /// `KL(reverse || forward)` terms; optimum at the posterior mean.
    #[default]
    Klub,
    /// Argument-swapped terms, `KL(forward || reverse)`.
    NegElbo,
}

impl LossVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            LossVariant::Klub => "klub",
            LossVariant::NegElbo => "neg_elbo",
        }
    }
}

impl fmt::Display for LossVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "klub" => Ok(LossVariant::Klub),
            "neg_elbo" => Ok(LossVariant::NegElbo),
            other => Err(Error::config("loss.variant", format!("unknown value {other:?}"))),
        }
    }
}

/// Per-sample (or batch-mean) loss components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown {
    pub klub_cond: f64,
    pub klub_marg: f64,
    /// `ω · klub_cond + (1 - ω) · klub_marg`.
    pub combined: f64,
    pub variant: LossVariant,
}

/// `KL(Beta(p) || Beta(q))`.
pub fn kl_beta(p: BetaParams, q: BetaParams) -> Result<f64> {
    let (ap, bp, aq, bq) = (p.a(), p.b(), q.a(), q.b());
    let psi_s = digamma(ap + bp)?;
    let kl = ln_beta(aq, bq)? - ln_beta(ap, bp)?
        - (aq - ap) * (digamma(ap)? - psi_s)
        - (bq - bp) * (digamma(bp)? - psi_s);
    // exact zero at p == q; tiny negative values are rounding
    Ok(kl.max(0.0))
}

/// Gradient of `KL(p || q)` with respect to `(a_p, b_p)`.
pub fn kl_beta_grad_first(p: BetaParams, q: BetaParams) -> Result<(f64, f64)> {
    let (ap, bp, aq, bq) = (p.a(), p.b(), q.a(), q.b());
    let tri_s = trigamma(ap + bp)?;
    let cross = (aq - ap + bq - bp) * tri_s;
    Ok(((ap - aq) * trigamma(ap)? + cross, (bp - bq) * trigamma(bp)? + cross))
}

/// Gradient of `KL(p || q)` with respect to `(a_q, b_q)`.
pub fn kl_beta_grad_second(p: BetaParams, q: BetaParams) -> Result<(f64, f64)> {
    let (ap, bp, aq, bq) = (p.a(), p.b(), q.a(), q.b());
    let psi_sq = digamma(aq + bq)?;
    let psi_sp = digamma(ap + bp)?;
    Ok((
        digamma(aq)? - psi_sq - digamma(ap)? + psi_sp,
        digamma(bq)? - psi_sq - digamma(bp)? + psi_sp,
    ))
}

/// Schedule values at one `(s, t)` pair, shared by both KLUB terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KlubGeometry {
    pub eta: f64,
    pub alpha_s: f64,
    pub alpha_t: f64,
    /// `α_s - α_t`, kept separately for precision when `s ≈ t`.
    pub alpha_diff: f64,
}

impl KlubGeometry {
    pub fn new(eta: f64, alpha_s: f64, alpha_t: f64) -> Result<Self> {
        Self::with_diff(eta, alpha_s, alpha_t, alpha_s - alpha_t)
    }

    fn with_diff(eta: f64, alpha_s: f64, alpha_t: f64, alpha_diff: f64) -> Result<Self> {
        if !(eta > 0.0 && alpha_t > 0.0 && alpha_diff > 0.0 && alpha_s <= 1.0) {
            return Err(Error::Argument(format!(
                "need η > 0 and 1 >= α_s > α_t > 0, got η={eta}, α_s={alpha_s}, α_t={alpha_t}"
            )));
        }
        Ok(Self {
            eta,
            alpha_s,
            alpha_t,
            alpha_diff,
        })
    }

    /// Geometry at `(s, t)` under the config's schedule.
    pub fn at_times(cfg: &DiffusionConfig, s: f64, t: f64) -> Result<Self> {
        if !(s < t) {
            return Err(Error::Argument(format!("need s < t, got s={s}, t={t}")));
        }
        let sched = &cfg.schedule;
        Self::with_diff(cfg.eta, sched.alpha(s)?, sched.alpha(t)?, sched.alpha_diff(s, t)?)
    }

    /// Geometry at `(π t, t)`.
    pub fn at_time(cfg: &DiffusionConfig, t: f64) -> Result<Self> {
        Self::at_times(cfg, cfg.pi * t, t)
    }

    fn check_x(&self, x: f64, what: &str) -> Result<()> {
        if x > 0.0 && x < 1.0 && self.alpha_s * x < 1.0 {
            Ok(())
        } else {
            Err(Error::domain(
                "klub",
                format!("{what}={x} must lie in (0,1) with α_s·{what} < 1"),
            ))
        }
    }

    /// Reverse-step parameters `[η(α_s - α_t)x, η(1 - α_s x)]`.
    pub fn conditional_params(&self, x: f64) -> Result<BetaParams> {
        BetaParams::new(self.eta * self.alpha_diff * x, self.eta * (1.0 - self.alpha_s * x))
    }

    /// Marginal parameters `[η α_t x, η(1 - α_t x)]`.
    pub fn marginal_params(&self, x: f64) -> Result<BetaParams> {
        BetaParams::new(self.eta * self.alpha_t * x, self.eta * (1.0 - self.alpha_t * x))
    }

    /// Conditional term for one argument order.
    pub fn conditional(&self, x0: f64, x0_hat: f64, variant: LossVariant) -> Result<f64> {
        self.check_x(x0, "x0")?;
        self.check_x(x0_hat, "x0_hat")?;
        let (data, model) = (self.conditional_params(x0)?, self.conditional_params(x0_hat)?);
        match variant {
            LossVariant::Klub => kl_beta(model, data),
            LossVariant::NegElbo => kl_beta(data, model),
        }
    }

    /// Marginal term for one argument order.
    pub fn marginal(&self, x0: f64, x0_hat: f64, variant: LossVariant) -> Result<f64> {
        self.check_x(x0, "x0")?;
        self.check_x(x0_hat, "x0_hat")?;
        let (data, model) = (self.marginal_params(x0)?, self.marginal_params(x0_hat)?);
        match variant {
            LossVariant::Klub => kl_beta(model, data),
            LossVariant::NegElbo => kl_beta(data, model),
        }
    }

    /// Combined loss and its exact derivative in `x̂0`.
    pub fn loss_and_grad(
        &self,
        x0: f64,
        x0_hat: f64,
        omega: f64,
        variant: LossVariant,
    ) -> Result<(LossBreakdown, f64)> {
        self.check_x(x0, "x0")?;
        self.check_x(x0_hat, "x0_hat")?;
        let eta = self.eta;
        // d(a, b)/d x̂0 for each parameterization
        let d_cond = (eta * self.alpha_diff, -eta * self.alpha_s);
        let d_marg = (eta * self.alpha_t, -eta * self.alpha_t);

        let term = |data: BetaParams, model: BetaParams, d: (f64, f64)| -> Result<(f64, f64)> {
            let (value, (ga, gb)) = match variant {
                LossVariant::Klub => (kl_beta(model, data)?, kl_beta_grad_first(model, data)?),
                LossVariant::NegElbo => (kl_beta(data, model)?, kl_beta_grad_second(data, model)?),
            };
            Ok((value, ga * d.0 + gb * d.1))
        };

        let (cond, g_cond) = if omega > 0.0 {
            term(self.conditional_params(x0)?, self.conditional_params(x0_hat)?, d_cond)?
        } else {
            (0.0, 0.0)
        };
        let (marg, g_marg) = if omega < 1.0 {
            term(self.marginal_params(x0)?, self.marginal_params(x0_hat)?, d_marg)?
        } else {
            (0.0, 0.0)
        };
        let breakdown = LossBreakdown {
            klub_cond: cond,
            klub_marg: marg,
            combined: omega * cond + (1.0 - omega) * marg,
            variant,
        };
        Ok((breakdown, omega * g_cond + (1.0 - omega) * g_marg))
    }
}

/// Conditional KLUB, `KL(p_{s←t}(x̂0) || q_{s←t}(x0))`.
pub fn klub_conditional(cfg: &DiffusionConfig, x0: f64, x0_hat: f64, s: f64, t: f64) -> Result<f64> {
    KlubGeometry::at_times(cfg, s, t)?.conditional(x0, x0_hat, LossVariant::Klub)
}

/// Marginal KLUB, `KL(q(z_t | x̂0) || q(z_t | x0))`.
pub fn klub_marginal(cfg: &DiffusionConfig, x0: f64, x0_hat: f64, t: f64) -> Result<f64> {
    let g = KlubGeometry::at_time(cfg, t)?;
    g.marginal(x0, x0_hat, LossVariant::Klub)
}

/// `ω · conditional + (1 - ω) · marginal` at `s = π t`.
pub fn combined_loss(
    cfg: &DiffusionConfig,
    x0: f64,
    x0_hat: f64,
    t: f64,
    variant: LossVariant,
) -> Result<LossBreakdown> {
    let g = KlubGeometry::at_time(cfg, t)?;
    let cond = g.conditional(x0, x0_hat, variant)?;
    let marg = g.marginal(x0, x0_hat, variant)?;
    Ok(LossBreakdown {
        klub_cond: cond,
        klub_marg: marg,
        combined: cfg.omega * cond + (1.0 - cfg.omega) * marg,
        variant,
    })
}

/// `∂ combined_loss / ∂ x̂0`.
pub fn loss_gradient(cfg: &DiffusionConfig, x0: f64, x0_hat: f64, t: f64, variant: LossVariant) -> Result<f64> {
    let g = KlubGeometry::at_time(cfg, t)?;
    Ok(g.loss_and_grad(x0, x0_hat, cfg.omega, variant)?.1)
}

/// `KL(prior at T with x0_mean || q(z_T | x0))`: how far the sampler's
/// starting distribution is from the true terminal marginal.
pub fn prior_gap_kl(cfg: &DiffusionConfig, x0_mean: f64, x0: f64, t_end: f64) -> Result<f64> {
    prior_gap_kl_at(cfg.eta, cfg.schedule.alpha(t_end)?, x0_mean, x0)
}

pub fn prior_gap_kl_at(eta: f64, alpha: f64, x0_mean: f64, x0: f64) -> Result<f64> {
    let prior = crate::chain::marginal_params(eta, alpha, x0_mean)?;
    let target = crate::chain::marginal_params(eta, alpha, x0)?;
    kl_beta(prior, target)
}

/// Minimizers of the expected conditional and marginal terms over a
/// discrete `x0` distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimalityReport {
    pub mixture_mean: f64,
    pub conditional_argmin: f64,
    pub marginal_argmin: f64,
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Numerically minimize `Σ w_i L(x0_i, x̂0)` over `x̂0` for each term.
///
/// `atoms` holds `(x0, weight)` pairs; weights are normalized here.
pub fn posterior_mean_optimality_check(
    atoms: &[(f64, f64)],
    geometry: &KlubGeometry,
    variant: LossVariant,
) -> Result<OptimalityReport> {
    if atoms.is_empty() {
        return Err(Error::Argument("need at least one atom".into()));
    }
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    if !(total > 0.0) || atoms.iter().any(|a| a.1 < 0.0) {
        return Err(Error::Argument("weights must be non-negative with positive sum".into()));
    }
    for &(x, _) in atoms {
        geometry.check_x(x, "x0")?;
    }
    let mean = atoms.iter().map(|&(x, w)| x * w).sum::<f64>() / total;
    let min = atoms.iter().map(|a| a.0).fold(f64::INFINITY, f64::min);
    let max = atoms.iter().map(|a| a.0).fold(f64::NEG_INFINITY, f64::max);
    let upper = (1.0 / geometry.alpha_s).min(1.0);
    let lo = (min - 0.05).max(1e-9);
    let hi = (max + 0.05).min(upper * (1.0 - 1e-9));

    let objective = |conditional: bool| {
        move |x_hat: f64| -> f64 {
            atoms
                .iter()
                .map(|&(x, w)| {
                    let v = if conditional {
                        geometry.conditional(x, x_hat, variant)
                    } else {
                        geometry.marginal(x, x_hat, variant)
                    };
                    w * v.unwrap_or(f64::INFINITY)
                })
                .sum::<f64>()
        }
    };
    Ok(OptimalityReport {
        mixture_mean: mean,
        conditional_argmin: golden_section(objective(true), lo, hi, 1e-11),
        marginal_argmin: golden_section(objective(false), lo, hi, 1e-11),
    })
}
