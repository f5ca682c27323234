//! Diffusion schedules `α_t`, signal-to-noise ratio and the sampling grid.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::softplus;

/// Smallest time ever used by training and the sampler's first nonzero step.
pub const T_MIN: f64 = 1e-5;

/// A strictly decreasing map `t ∈ [0, 1] -> α_t ∈ (0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Schedule {
    /// `α_t = exp(-β_d t²/2 - β_min t)`.
    BetaLinear { beta_d: f64, beta_min: f64 },
    /// `α_t = sigmoid(c0 + (c1 - c0) t)`.
    Sigmoid { c0: f64, c1: f64 },
    /// `α_t = sigmoid(c1)^t`; the sampler's low-NFE variant.
    SigmoidPower { c1: f64 },
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::BetaLinear {
            beta_d: 19.9,
            beta_min: 0.1,
        }
    }
}

impl Schedule {
    pub fn beta_linear(beta_d: f64, beta_min: f64) -> Result<Self> {
        Schedule::BetaLinear { beta_d, beta_min }.validated()
    }

    pub fn sigmoid(c0: f64, c1: f64) -> Result<Self> {
        Schedule::Sigmoid { c0, c1 }.validated()
    }

    pub fn sigmoid_power(c1: f64) -> Result<Self> {
        Schedule::SigmoidPower { c1 }.validated()
    }

    /// The image-model defaults, `c0 = 10`, `c1 = -13`.
    pub fn default_sigmoid() -> Self {
        Schedule::Sigmoid { c0: 10.0, c1: -13.0 }
    }

    pub fn validated(self) -> Result<Self> {
        let ok = match self {
            Schedule::BetaLinear { beta_d, beta_min } => {
                beta_d.is_finite()
                    && beta_min.is_finite()
                    && beta_d >= 0.0
                    && beta_min >= 0.0
                    && beta_d + beta_min > 0.0
            }
            Schedule::Sigmoid { c0, c1 } => c0.is_finite() && c1.is_finite() && c1 < c0,
            Schedule::SigmoidPower { c1 } => c1.is_finite(),
        };
        if ok {
            Ok(self)
        } else {
            Err(Error::config("schedule", format!("not strictly decreasing: {self:?}")))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Schedule::BetaLinear { .. } => "beta_linear",
            Schedule::Sigmoid { .. } => "sigmoid",
            Schedule::SigmoidPower { .. } => "sigmoid_power",
        }
    }

    fn ln_alpha_unchecked(&self, t: f64) -> f64 {
        match *self {
            Schedule::BetaLinear { beta_d, beta_min } => -0.5 * beta_d * t * t - beta_min * t,
            Schedule::Sigmoid { c0, c1 } => -softplus(-(c0 + (c1 - c0) * t)),
            Schedule::SigmoidPower { c1 } => -t * softplus(-c1),
        }
    }

    fn check_time(t: f64) -> Result<()> {
        if (0.0..=1.0).contains(&t) {
            Ok(())
        } else {
            Err(Error::domain("schedule", format!("t={t} outside [0,1]")))
        }
    }

    /// `ln α_t`.
    pub fn ln_alpha(&self, t: f64) -> Result<f64> {
        Self::check_time(t)?;
        Ok(self.ln_alpha_unchecked(t))
    }

    /// `α_t`.
    pub fn alpha(&self, t: f64) -> Result<f64> {
        Ok(self.ln_alpha(t)?.exp())
    }

    /// `α_s - α_t` for `s < t`, without cancellation when `s` and `t` are
    /// close.
    pub fn alpha_diff(&self, s: f64, t: f64) -> Result<f64> {
        Self::check_time(s)?;
        Self::check_time(t)?;
        let ls = self.ln_alpha_unchecked(s);
        let lt = self.ln_alpha_unchecked(t);
        Ok(lt.exp() * (ls - lt).exp_m1())
    }

    /// `SNR_t = α_t x0 (η + 1) / (1 - α_t x0)`.
    pub fn snr(&self, t: f64, x0: f64, eta: f64) -> Result<f64> {
        snr_from_alpha(self.alpha(t)?, x0, eta)
    }
}

/// Signal-to-noise ratio of the beta marginal given `α_t`.
pub fn snr_from_alpha(alpha_t: f64, x0: f64, eta: f64) -> Result<f64> {
    let m = alpha_t * x0;
    if !(m > 0.0 && m < 1.0) || !(eta > 0.0) {
        return Err(Error::domain("snr", format!("need 0 < α_t·x0 < 1 and η > 0, got α_t·x0={m}, η={eta}")));
    }
    Ok(m * (eta + 1.0) / (1.0 - m))
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schedule::BetaLinear { beta_d, beta_min } => {
                write!(f, "beta_linear(beta_d={beta_d}, beta_min={beta_min})")
            }
            Schedule::Sigmoid { c0, c1 } => write!(f, "sigmoid(c0={c0}, c1={c1})"),
            Schedule::SigmoidPower { c1 } => write!(f, "sigmoid_power(c1={c1})"),
        }
    }
}

/// Reverse-time grid `t_0 = 0`, `t_j = 1 - (1 - 1e-5)(J - j)/(J - 1)`.
pub fn sampling_grid(nfe: usize) -> Result<Vec<f64>> {
    if nfe < 2 {
        return Err(Error::config("sampler.nfe", format!("must be >= 2, got {nfe}")));
    }
    let j_max = nfe as f64;
    let mut grid = Vec::with_capacity(nfe + 1);
    grid.push(0.0);
    for j in 1..=nfe {
        grid.push(1.0 - (1.0 - T_MIN) * (j_max - j as f64) / (j_max - 1.0));
    }
    Ok(grid)
}

/// Which `α` form the sampler uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum AlphaBranch {
    /// Sigmoid-trained models switch to the power form for `NFE <= 350`;
    /// other schedules are reused as trained.
    #[default]
    Auto,
    /// Always the training schedule.
    Sigmoid,
    /// Always the power form; needs a sigmoid training schedule.
    Power,
}

impl AlphaBranch {
    pub fn as_str(&self) -> &'static str {
        match self {
            AlphaBranch::Auto => "auto",
            AlphaBranch::Sigmoid => "sigmoid",
            AlphaBranch::Power => "power",
        }
    }

    /// The schedule the sampler evaluates for a model trained with `trained`.
    pub fn resolve(&self, trained: Schedule, nfe: usize) -> Result<Schedule> {
        match (self, trained) {
            (AlphaBranch::Sigmoid, s) => Ok(s),
            (AlphaBranch::Auto, Schedule::Sigmoid { c1, .. }) if nfe <= 350 => {
                Schedule::sigmoid_power(c1)
            }
            (AlphaBranch::Auto, s) => Ok(s),
            (AlphaBranch::Power, Schedule::Sigmoid { c1, .. })
            | (AlphaBranch::Power, Schedule::SigmoidPower { c1 }) => Schedule::sigmoid_power(c1),
            (AlphaBranch::Power, s) => Err(Error::config(
                "sampler.alpha_branch",
                format!("power branch needs a sigmoid training schedule, got {}", s.name()),
            )),
        }
    }
}

impl FromStr for AlphaBranch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(AlphaBranch::Auto),
            "sigmoid" => Ok(AlphaBranch::Sigmoid),
            "power" => Ok(AlphaBranch::Power),
            other => Err(Error::config("sampler.alpha_branch", format!("unknown value {other:?}"))),
        }
    }
}
