//! Beta diffusion for range-bounded data.
//!
//! The forward process multiplies a latent in `(0, 1)` by beta-distributed
//! factors, so every marginal given the data is a beta distribution. The
//! reverse process grows the latent back toward the data by adding a
//! beta-distributed fraction of the remaining gap. Training minimizes
//! KL-divergence upper bounds (KLUBs) written as log-beta Bregman divergences.
//!
//! Module map:
//!
//! - [`specfn`]: `ln Γ`, `ln B`, digamma, trigamma
//! - [`random`]: seeded streams, log-gamma and logit-beta variates
//! - [`schedule`]: `α_t` schedules, SNR, sampling grid
//! - [`chain`]: forward/reverse beta kernels and the logit-space update
//! - [`loss`]: KL between betas, KLUB terms, negative-ELBO variant, gradients
//! - [`net`]: MLP generator, backprop, Adam, logit preconditioning statistics
//! - [`gauss`]: Gaussian diffusion baseline
//! - [`data`]: synthetic datasets and scale/shift preprocessing
//! - [`eval`]: Wasserstein-1, Jensen–Shannon, Hellinger
//! - [`trainer`] / [`sampler`]: the training loop and reverse-chain generation
//! - [`experiment`]: config files, presets, checkpoints, run directories, plots
//! - [`stats`]: Kolmogorov–Smirnov tests and moment helpers used for validation

pub mod chain;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod gauss;
pub mod loss;
pub mod net;
pub mod random;
pub mod sampler;
pub mod schedule;
pub mod specfn;
pub mod stats;
pub mod trainer;

pub use chain::{DiffusionConfig, LogitSample};
pub use error::{Error, Result};
pub use loss::{LossBreakdown, LossVariant};
pub use net::GeneratorNet;
pub use random::{BetaParams, RngStream};
pub use schedule::Schedule;

/// `ln(z / (1 - z))`.
#[inline]
pub fn logit(z: f64) -> f64 {
    z.ln() - (-z).ln_1p()
}

/// Logistic sigmoid, evaluated without overflow for large `|x|`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}
