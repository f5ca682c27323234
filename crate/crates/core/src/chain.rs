//! Beta diffusion kernels.
//!
//! Given data `x0 ∈ (0, 1)` and times `s < t`:
//!
//! ```text
//! q(z_t | x0)      = Beta(η α_t x0, η (1 - α_t x0))
//! z_t = z_s π,       π ~ Beta(η α_t x0, η (α_s - α_t) x0)          (forward)
//! z_s = z_t + (1 - z_t) p,  p ~ Beta(η (α_s - α_t) x0, η (1 - α_s x0))  (reverse)
//! ```
//!
//! Latents are carried as logits. Direct-space `z` only appears in
//! densities, metrics and visualization.

use crate::error::{Error, Result};
use crate::random::BetaParams;
use crate::schedule::Schedule;
use crate::sigmoid;
use crate::specfn::ln_beta;

/// A latent `z_t` stored as `logit(z_t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogitSample {
    pub logit_z: f64,
    pub t: f64,
}

impl LogitSample {
    pub fn new(logit_z: f64, t: f64) -> Result<Self> {
        if !logit_z.is_finite() || !(0.0..=1.0).contains(&t) {
            return Err(Error::domain(
                "LogitSample",
                format!("need finite logit and t in [0,1], got ({logit_z}, {t})"),
            ));
        }
        Ok(Self { logit_z, t })
    }

    pub fn z(&self) -> f64 {
        sigmoid(self.logit_z)
    }
}

/// Concentration, data scale/shift, loss weights and schedule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffusionConfig {
    /// Concentration η.
    pub eta: f64,
    pub scale: f64,
    pub shift: f64,
    /// Weight of the conditional KLUB term.
    pub omega: f64,
    /// Time reversal ratio, `s = π t`.
    pub pi: f64,
    pub schedule: Schedule,
}

impl Default for DiffusionConfig {
    /// Synthetic-data settings: η = 1e4, ω = 0.5, π = 0.95, no scaling.
    fn default() -> Self {
        Self {
            eta: 10_000.0,
            scale: 1.0,
            shift: 0.0,
            omega: 0.5,
            pi: 0.95,
            schedule: Schedule::default(),
        }
    }
}

impl DiffusionConfig {
    /// Image-model settings: `S_cale = 0.39`, `S_hift = 0.6`, ω = 0.99,
    /// sigmoid schedule.
    pub fn image_defaults() -> Self {
        Self {
            eta: 10_000.0,
            scale: 0.39,
            shift: 0.6,
            omega: 0.99,
            pi: 0.95,
            schedule: Schedule::default_sigmoid(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::config("diffusion.eta", format!("must be > 0, got {}", self.eta)));
        }
        if !(self.scale > 0.0 && self.shift >= 0.0 && self.scale + self.shift <= 1.0) {
            return Err(Error::config(
                "diffusion.scale",
                format!(
                    "need scale > 0, shift >= 0, scale + shift <= 1; got scale={}, shift={}",
                    self.scale, self.shift
                ),
            ));
        }
        if !(0.0..=1.0).contains(&self.omega) {
            return Err(Error::config("loss.omega", format!("must be in [0,1], got {}", self.omega)));
        }
        if !(self.pi > 0.0 && self.pi < 1.0) {
            return Err(Error::config("loss.pi", format!("must be in (0,1), got {}", self.pi)));
        }
        self.schedule.validated()?;
        Ok(())
    }

    /// Map raw data in `[0, 1]` into the model range.
    pub fn preprocess(&self, x_raw: f64) -> f64 {
        x_raw * self.scale + self.shift
    }

    pub fn postprocess(&self, x0: f64) -> f64 {
        (x0 - self.shift) / self.scale
    }
}

fn check_unit(func: &'static str, what: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(func, format!("{what}={v} must lie in (0,1)")))
    }
}

fn check_order(s: f64, t: f64) -> Result<()> {
    if s < t {
        Ok(())
    } else {
        Err(Error::Argument(format!("need s < t, got s={s}, t={t}")))
    }
}

/// `Beta(η α_t x0, η (1 - α_t x0))`.
pub fn marginal_params(eta: f64, alpha_t: f64, x0: f64) -> Result<BetaParams> {
    let m = alpha_t * x0;
    check_unit("forward_marginal_params", "α_t·x0", m)?;
    BetaParams::new(eta * m, eta * (1.0 - m))
}

/// Multiplier `π_{s→t} ~ Beta(η α_t x0, η (α_s - α_t) x0)`.
pub fn forward_conditional_params_at(eta: f64, alpha_s: f64, alpha_diff: f64, x0: f64) -> Result<BetaParams> {
    check_unit("forward_conditional_params", "x0", x0)?;
    let alpha_t = alpha_s - alpha_diff;
    if !(alpha_diff > 0.0) {
        return Err(Error::Argument(format!("need α_s > α_t, got α_s - α_t = {alpha_diff}")));
    }
    BetaParams::new(eta * alpha_t * x0, eta * alpha_diff * x0)
}

/// Reverse fraction `p_{s←t} ~ Beta(η (α_s - α_t) x̂0, η (1 - α_s x̂0))`.
pub fn reverse_conditional_params_at(
    eta: f64,
    alpha_s: f64,
    alpha_diff: f64,
    x0_hat: f64,
) -> Result<BetaParams> {
    if !(x0_hat > 0.0) {
        return Err(Error::domain("reverse_conditional_params", format!("x0_hat={x0_hat} must be > 0")));
    }
    check_unit("reverse_conditional_params", "α_s·x0_hat", alpha_s * x0_hat)?;
    if !(alpha_diff > 0.0) {
        return Err(Error::Argument(format!("need α_s > α_t, got α_s - α_t = {alpha_diff}")));
    }
    BetaParams::new(eta * alpha_diff * x0_hat, eta * (1.0 - alpha_s * x0_hat))
}

/// Forward marginal `q(z_t | x0)` at time `t`.
pub fn forward_marginal_params(cfg: &DiffusionConfig, x0: f64, t: f64) -> Result<BetaParams> {
    marginal_params(cfg.eta, cfg.schedule.alpha(t)?, x0)
}

/// Forward multiplier distribution for `s < t`; `z_t = z_s · π_{s→t}`.
pub fn forward_conditional_params(cfg: &DiffusionConfig, x0: f64, s: f64, t: f64) -> Result<BetaParams> {
    check_order(s, t)?;
    let alpha_s = cfg.schedule.alpha(s)?;
    let diff = cfg.schedule.alpha_diff(s, t)?;
    forward_conditional_params_at(cfg.eta, alpha_s, diff, x0)
}

/// Reverse fraction distribution for `s < t`; `z_s = z_t + (1 - z_t) p_{s←t}`.
pub fn reverse_conditional_params(cfg: &DiffusionConfig, x0_hat: f64, s: f64, t: f64) -> Result<BetaParams> {
    check_order(s, t)?;
    let alpha_s = cfg.schedule.alpha(s)?;
    let diff = cfg.schedule.alpha_diff(s, t)?;
    reverse_conditional_params_at(cfg.eta, alpha_s, diff, x0_hat)
}

/// `logit(z_s) = ln(e^{l1} + e^{l2} + e^{l1 + l2})`, where `l1 = logit(z_t)`
/// and `l2 = logit(p)`; equivalent to `z_s = z_t + (1 - z_t) p`.
#[inline]
pub fn reverse_update_logit(logit_zt: f64, logit_p: f64) -> f64 {
    let both = logit_zt + logit_p;
    let m = logit_zt.max(logit_p).max(both);
    m + ((logit_zt - m).exp() + (logit_p - m).exp() + (both - m).exp()).ln()
}

/// Rescale a forward latent for display:
/// `clamp((z_t / α_t - S_hift) / S_cale, 0, 1)`.
pub fn viz_transform(cfg: &DiffusionConfig, logit_zt: f64, alpha_t: f64) -> f64 {
    let z = sigmoid(logit_zt);
    ((z / alpha_t - cfg.shift) / cfg.scale).clamp(0.0, 1.0)
}

/// Log-densities of the conditional bivariate beta distribution and its
/// four factors, evaluated from `ln B` so large shapes do not overflow.
pub mod density {
    use super::*;

    /// `ln q(z_t | x0)`.
    pub fn ln_marginal(eta: f64, alpha: f64, x0: f64, z: f64) -> Result<f64> {
        marginal_params(eta, alpha, x0)?.ln_pdf(z)
    }

    /// `ln q(z_t | z_s, x0)`: density of `z_t = z_s π`.
    pub fn ln_forward_conditional(eta: f64, alpha_s: f64, alpha_t: f64, x0: f64, z_s: f64, z_t: f64) -> Result<f64> {
        let p = forward_conditional_params_at(eta, alpha_s, alpha_s - alpha_t, x0)?;
        Ok(p.ln_pdf(z_t / z_s)? - z_s.ln())
    }

    /// `ln q(z_s | z_t, x0)`: density of `z_s = z_t + (1 - z_t) p`.
    pub fn ln_reverse_conditional(eta: f64, alpha_s: f64, alpha_t: f64, x0: f64, z_s: f64, z_t: f64) -> Result<f64> {
        let p = reverse_conditional_params_at(eta, alpha_s, alpha_s - alpha_t, x0)?;
        Ok(p.ln_pdf((z_s - z_t) / (1.0 - z_t))? - (-z_t).ln_1p())
    }

    /// Closed-form joint `ln q(z_s, z_t | x0)` for `0 < z_t < z_s < 1`.
    pub fn ln_joint(eta: f64, alpha_s: f64, alpha_t: f64, x0: f64, z_s: f64, z_t: f64) -> Result<f64> {
        if !(0.0 < z_t && z_t < z_s && z_s < 1.0) {
            return Err(Error::domain("ln_joint", format!("need 0 < z_t < z_s < 1, got ({z_t}, {z_s})")));
        }
        let a = eta * alpha_t * x0;
        let b = eta * (1.0 - alpha_s * x0);
        let c = eta * (alpha_s - alpha_t) * x0;
        // Γ(η)/(Γ(a)Γ(b)Γ(c)) with a + b + c = η, via two log-beta terms
        let ln_norm = -(ln_beta(a, c)? + ln_beta(a + c, b)?);
        Ok(ln_norm + (a - 1.0) * z_t.ln() + (b - 1.0) * (-z_s).ln_1p() + (c - 1.0) * (z_s - z_t).ln())
    }
}
