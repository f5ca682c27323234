//! Gaussian-diffusion baseline: variance-preserving forward marginal,
//! conjugate posterior, and the SNR-weighted x0-prediction losses.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::random::RngStream;
use crate::schedule::Schedule;

/// `z_t = √α_t x0 + √(1 - α_t) ε`.
pub fn gauss_forward_sample_at(stream: &mut RngStream, x0: f64, alpha_t: f64) -> Result<f64> {
    if !(alpha_t > 0.0 && alpha_t <= 1.0) {
        return Err(Error::domain("gauss_forward_sample", format!("α_t = {alpha_t} not in (0, 1]")));
    }
    let eps = stream.normal();
    Ok(alpha_t.sqrt() * x0 + (1.0 - alpha_t).sqrt() * eps)
}

pub fn gauss_forward_sample(stream: &mut RngStream, x0: f64, t: f64, sched: &Schedule) -> Result<f64> {
    gauss_forward_sample_at(stream, x0, sched.alpha(t)?)
}

/// `q(z_s | x0, z_t) = N(c_x0 x0 + c_zt z_t, variance)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussPosteriorParams {
    pub coef_x0: f64,
    pub coef_zt: f64,
    pub variance: f64,
}

impl GaussPosteriorParams {
    pub fn mean(&self, x0: f64, z_t: f64) -> f64 {
        self.coef_x0 * x0 + self.coef_zt * z_t
    }
}

/// Posterior coefficients for `α_s > α_t`, `α_t > 0`, `α_s ≤ 1`.
pub fn gauss_posterior_at(alpha_s: f64, alpha_t: f64) -> Result<GaussPosteriorParams> {
    if !(alpha_t > 0.0 && alpha_s > alpha_t && alpha_s <= 1.0) {
        return Err(Error::Argument(format!("need 1 >= α_s > α_t > 0, got α_s={alpha_s}, α_t={alpha_t}")));
    }
    let ratio = alpha_t / alpha_s;
    let one_minus_ratio = 1.0 - ratio;
    let (one_minus_s, one_minus_t) = (1.0 - alpha_s, 1.0 - alpha_t);
    Ok(GaussPosteriorParams {
        coef_x0: alpha_s.sqrt() / one_minus_t * one_minus_ratio,
        coef_zt: one_minus_s / one_minus_t * ratio.sqrt(),
        variance: one_minus_s / one_minus_t * one_minus_ratio,
    })
}

/// Time-based wrapper; `s < t` required.
pub fn gauss_posterior(s: f64, t: f64, sched: &Schedule) -> Result<GaussPosteriorParams> {
    if !(s < t) {
        return Err(Error::Argument(format!("need s < t, got s={s}, t={t}")));
    }
    gauss_posterior_at(sched.alpha(s)?, sched.alpha(t)?)
}

/// Loss weighting for the x0-prediction objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GaussWeighting {
    /// `SNR_t = α_t / (1 - α_t)`.
    #[default]
    SnrT,
    /// `½ (SNR_s - SNR_t)`, the per-step negative ELBO.
    SnrDiff,
}

impl GaussWeighting {
    pub fn as_str(&self) -> &'static str {
        match self {
            GaussWeighting::SnrT => "snr_t",
            GaussWeighting::SnrDiff => "snr_diff",
        }
    }

    /// Weight multiplying `(x0 - x̂0)²`.
    pub fn weight(&self, alpha_s: f64, alpha_t: f64) -> f64 {
        let snr = |a: f64| a / (1.0 - a);
        match self {
            GaussWeighting::SnrT => snr(alpha_t),
            GaussWeighting::SnrDiff => 0.5 * (snr(alpha_s) - snr(alpha_t)),
        }
    }
}

impl fmt::Display for GaussWeighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GaussWeighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "snr_t" => Ok(GaussWeighting::SnrT),
            "snr_diff" => Ok(GaussWeighting::SnrDiff),
            other => Err(Error::config("gauss.weighting", format!("unknown value {other:?}"))),
        }
    }
}

/// Weighted squared error and its derivative with respect to `x̂0`.
pub fn gauss_loss_and_grad(x0: f64, x0_hat: f64, alpha_s: f64, alpha_t: f64, weighting: GaussWeighting) -> (f64, f64) {
    let w = weighting.weight(alpha_s, alpha_t);
    let err = x0 - x0_hat;
    (w * err * err, -2.0 * w * err)
}

pub fn gauss_elbo_loss_at(x0: f64, x0_hat: f64, alpha_s: f64, alpha_t: f64, weighting: GaussWeighting) -> Result<f64> {
    if !(alpha_t > 0.0 && alpha_s > alpha_t && alpha_s < 1.0) {
        return Err(Error::Argument(format!("need 1 > α_s > α_t > 0, got α_s={alpha_s}, α_t={alpha_t}")));
    }
    Ok(gauss_loss_and_grad(x0, x0_hat, alpha_s, alpha_t, weighting).0)
}

pub fn gauss_elbo_loss(
    x0: f64,
    x0_hat: f64,
    s: f64,
    t: f64,
    sched: &Schedule,
    weighting: GaussWeighting,
) -> Result<f64> {
    if !(s < t) {
        return Err(Error::Argument(format!("need s < t, got s={s}, t={t}")));
    }
    gauss_elbo_loss_at(x0, x0_hat, sched.alpha(s)?, sched.alpha(t)?, weighting)
}

/// `KL(N(m1, v1) || N(m2, v2))`.
pub fn kl_normal(m1: f64, v1: f64, m2: f64, v2: f64) -> f64 {
    0.5 * ((v2 / v1).ln() + (v1 + (m1 - m2).powi(2)) / v2 - 1.0)
}
