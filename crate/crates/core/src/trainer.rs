//! Mini-batch training for the beta model and the Gaussian baseline.
//!
//! Each step draws `t ~ Unif(1e-5, 1)`, sets `s = π t`, corrupts the
//! preprocessed data, predicts `x̂0` with the network and applies one Adam
//! update with the batch-mean gradient.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::chain::{marginal_params, DiffusionConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::{evaluate, Evaluation, MetricsRow};
use crate::gauss::{gauss_forward_sample_at, gauss_loss_and_grad, GaussWeighting};
use crate::loss::{KlubGeometry, LossVariant};
use crate::net::{clip_grad_norm, AdamState, GeneratorNet, InputEncoder, NetConfig};
use crate::random::{sample_beta_logit, streams, RngStream};
use crate::sampler::{BetaSampler, GaussSampler, SampleRun, SamplerConfig, X0_HAT_MARGIN};
use crate::schedule::T_MIN;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ModelKind {
    #[default]
    Beta,
    Gauss,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Beta => "beta",
            ModelKind::Gauss => "gauss",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beta" => Ok(ModelKind::Beta),
            "gauss" => Ok(ModelKind::Gauss),
            other => Err(Error::config("model", format!("unknown value {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub iterations: u64,
    pub lr: f64,
    /// Evaluate every this many iterations (and always at the end).
    pub eval_every: u64,
    /// Generated samples per evaluation.
    pub eval_samples: usize,
    pub seed: u64,
    pub variant: LossVariant,
    pub model: ModelKind,
    pub gauss_weighting: GaussWeighting,
    /// Global gradient-norm cap; off when `None`.
    pub grad_clip: Option<f64>,
    /// Evaluate per-sample losses serially. Results are identical either
    /// way; this only removes the thread pool from the step.
    pub deterministic: bool,
    /// Progress log cadence in iterations.
    pub log_every: u64,
}

impl Default for TrainConfig {
    /// Synthetic-data settings: B = 1000, lr = 5e-4.
    fn default() -> Self {
        Self {
            batch_size: 1000,
            iterations: 100_000,
            lr: 5e-4,
            eval_every: 5000,
            eval_samples: 100_000,
            seed: 0,
            variant: LossVariant::Klub,
            model: ModelKind::Beta,
            gauss_weighting: GaussWeighting::SnrT,
            grad_clip: None,
            deterministic: false,
            log_every: 1000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("train.batch_size", "must be >= 1"));
        }
        if self.iterations == 0 {
            return Err(Error::config("train.iterations", "must be >= 1"));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::config("train.lr", format!("must be positive, got {}", self.lr)));
        }
        if self.eval_every == 0 {
            return Err(Error::config("train.eval_every", "must be >= 1"));
        }
        if self.eval_samples == 0 {
            return Err(Error::config("eval.samples", "must be >= 1"));
        }
        if self.log_every == 0 {
            return Err(Error::config("train.log_every", "must be >= 1"));
        }
        if let Some(c) = self.grad_clip {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::config("train.grad_clip", format!("must be positive, got {c}")));
            }
        }
        Ok(())
    }

    /// Label used in metrics rows, e.g. `beta_klub`.
    pub fn model_label(&self) -> String {
        match self.model {
            ModelKind::Beta => format!("beta_{}", self.variant),
            ModelKind::Gauss => format!("gauss_{}", self.gauss_weighting),
        }
    }
}

/// Batch means from one step. The KLUB components are absent for the
/// Gaussian model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    pub iteration: u64,
    pub loss: f64,
    pub klub_cond: Option<f64>,
    pub klub_marg: Option<f64>,
    pub grad_norm: f64,
}

impl StepStats {
    /// `iter=<n> loss=<v> klub_cond=<v> klub_marg=<v>`.
    pub fn log_line(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"));
        format!(
            "iter={} loss={:.6e} klub_cond={} klub_marg={}",
            self.iteration,
            self.loss,
            opt(self.klub_cond),
            opt(self.klub_marg)
        )
    }
}

/// Everything that evolves during training.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub diffusion: DiffusionConfig,
    pub train: TrainConfig,
    pub net_config: NetConfig,
    pub data: Dataset,
    pub net: GeneratorNet,
    pub adam: AdamState,
    pub stream: RngStream,
    pub iteration: u64,
}

struct SampleLoss {
    loss: f64,
    cond: f64,
    marg: f64,
    /// dL/d(network output), before the 1/B factor.
    upstream: f64,
}

impl Trainer {
    pub fn new(diffusion: DiffusionConfig, train: TrainConfig, net_config: NetConfig, data: Dataset) -> Result<Self> {
        diffusion.validate()?;
        train.validate()?;
        let net = net_config.build(&mut RngStream::new(train.seed, streams::INIT))?;
        let adam = AdamState::new(net.num_params(), train.lr);
        let stream = RngStream::new(train.seed, streams::TRAIN);
        let trainer = Self {
            diffusion,
            train,
            net_config,
            data,
            net,
            adam,
            stream,
            iteration: 0,
        };
        trainer.encoder()?;
        Ok(trainer)
    }

    /// Input encoding of the beta model; the data range comes from the
    /// dataset support after preprocessing.
    pub fn encoder(&self) -> Result<InputEncoder> {
        let (lo, hi) = self.data.support();
        let enc = InputEncoder {
            kind: self.net_config.input,
            eta: self.diffusion.eta,
            schedule: self.diffusion.schedule,
            x_min: self.diffusion.preprocess(lo),
            x_max: self.diffusion.preprocess(hi),
        };
        if enc.kind == crate::net::InputKind::Precond && !(enc.x_min > 0.0 && enc.x_min < enc.x_max && enc.x_max < 1.0) {
            return Err(Error::config(
                "net.input",
                format!("precond needs a data range strictly inside (0,1), got [{}, {}]", enc.x_min, enc.x_max),
            ));
        }
        Ok(enc)
    }

    /// One optimizer step on a fresh batch.
    pub fn step(&mut self) -> Result<StepStats> {
        let b = self.train.batch_size;
        let cfg = self.diffusion;
        let it = self.iteration + 1;
        let x0: Vec<f64> = (0..b).map(|_| cfg.preprocess(self.data.sample_one(&mut self.stream))).collect();
        let ts: Vec<f64> = (0..b).map(|_| self.stream.uniform(T_MIN, 1.0)).collect();
        let mut inputs = Vec::with_capacity(b);
        match self.train.model {
            ModelKind::Beta => {
                let enc = self.encoder()?;
                for (&x, &t) in x0.iter().zip(&ts) {
                    let p = marginal_params(cfg.eta, cfg.schedule.alpha(t)?, x)?;
                    let logit_z = sample_beta_logit(&mut self.stream, p)?;
                    inputs.push(enc.encode(logit_z, t)?);
                }
            }
            ModelKind::Gauss => {
                for (&x, &t) in x0.iter().zip(&ts) {
                    inputs.push(gauss_forward_sample_at(&mut self.stream, x, cfg.schedule.alpha(t)?)?);
                }
            }
        }
        let cache = self.net.forward_batch(&inputs, &ts);
        let per_sample = |i: usize| self.sample_loss(x0[i], ts[i], cache.output[i]);
        let losses: Vec<Result<SampleLoss>> = if self.train.deterministic {
            (0..b).map(per_sample).collect()
        } else {
            (0..b).into_par_iter().map(per_sample).collect()
        };
        let mut upstream = Vec::with_capacity(b);
        let (mut loss, mut cond, mut marg) = (0.0, 0.0, 0.0);
        for (i, r) in losses.into_iter().enumerate() {
            let l = r.map_err(|e| Error::Numeric(format!("iteration {it}, sample {i}: {e}")))?;
            if !(l.loss.is_finite() && l.upstream.is_finite()) {
                return Err(Error::Numeric(format!(
                    "iteration {it}: non-finite loss {} at sample {i} (x0={}, t={}, output={})",
                    l.loss, x0[i], ts[i], cache.output[i]
                )));
            }
            loss += l.loss;
            cond += l.cond;
            marg += l.marg;
            upstream.push(l.upstream / b as f64);
        }
        let mut grads = self.net.backward(&cache, &upstream);
        let grad_norm = match self.train.grad_clip {
            Some(c) => clip_grad_norm(&mut grads, c),
            None => grads.iter().map(|g| g * g).sum::<f64>().sqrt(),
        };
        self.adam
            .step(self.net.params_mut(), &grads)
            .map_err(|e| Error::Numeric(format!("iteration {it}: {e}")))?;
        self.iteration = it;
        let n = b as f64;
        let (klub_cond, klub_marg) = match self.train.model {
            ModelKind::Beta => (Some(cond / n), Some(marg / n)),
            ModelKind::Gauss => (None, None),
        };
        Ok(StepStats {
            iteration: it,
            loss: loss / n,
            klub_cond,
            klub_marg,
            grad_norm,
        })
    }

    fn sample_loss(&self, x0: f64, t: f64, output: f64) -> Result<SampleLoss> {
        let cfg = &self.diffusion;
        let raw = cfg.scale * output + cfg.shift;
        match self.train.model {
            ModelKind::Beta => {
                let x_hat = raw.clamp(X0_HAT_MARGIN, 1.0 - X0_HAT_MARGIN);
                let geo = KlubGeometry::at_time(cfg, t)?;
                let (br, g) = geo.loss_and_grad(x0, x_hat, cfg.omega, self.train.variant)?;
                // a clamped prediction has no gradient through the clamp
                let g = if x_hat == raw { g } else { 0.0 };
                Ok(SampleLoss {
                    loss: br.combined,
                    cond: br.klub_cond,
                    marg: br.klub_marg,
                    upstream: g * cfg.scale,
                })
            }
            ModelKind::Gauss => {
                let alpha_t = cfg.schedule.alpha(t)?;
                let alpha_s = cfg.schedule.alpha(cfg.pi * t)?;
                let (l, g) = gauss_loss_and_grad(x0, raw, alpha_s, alpha_t, self.train.gauss_weighting);
                Ok(SampleLoss {
                    loss: l,
                    cond: 0.0,
                    marg: 0.0,
                    upstream: g * cfg.scale,
                })
            }
        }
    }

    /// Generate `n` values with the current network.
    pub fn sample(&self, n: usize, scfg: SamplerConfig, stream: &RngStream) -> Result<SampleRun> {
        match self.train.model {
            ModelKind::Beta => {
                let s = BetaSampler::new(&self.net, &self.diffusion, self.encoder()?, self.data.mean(), scfg)?;
                s.sample_many(n, stream)
            }
            ModelKind::Gauss => GaussSampler::new(&self.net, &self.diffusion, scfg)?.sample_many(n, stream),
        }
    }

    /// Sample `train.eval_samples` values and score them against the data.
    /// The evaluation stream depends only on the seed and iteration.
    pub fn evaluate(&self, scfg: SamplerConfig) -> Result<(SampleRun, Evaluation)> {
        let base = RngStream::new(self.train.seed, streams::EVAL).derive(self.iteration);
        let run = self.sample(self.train.eval_samples, scfg, &base.derive(0))?;
        let ev = evaluate(&run.values, &self.data, &mut base.derive(1))?;
        Ok((run, ev))
    }

    /// Train until `train.iterations`, evaluating on schedule. `on_event`
    /// sees every step and every evaluation; an error from it stops
    /// training.
    pub fn run<F>(&mut self, scfg: SamplerConfig, mut on_event: F) -> Result<Vec<MetricsRow>>
    where
        F: FnMut(&Trainer, TrainEvent<'_>) -> Result<()>,
    {
        let mut rows = Vec::new();
        let label = self.train.model_label();
        while self.iteration < self.train.iterations {
            let stats = self.step()?;
            if stats.iteration % self.train.log_every == 0 {
                log::info!("{}", stats.log_line());
            }
            on_event(self, TrainEvent::Step(&stats))?;
            if stats.iteration % self.train.eval_every == 0 || stats.iteration == self.train.iterations {
                let (run, ev) = self.evaluate(scfg)?;
                let row = ev.row(self.iteration, &label);
                log::info!(
                    "eval iter={} w1={:.5} jsd={:.5} hellinger={:.5} clamped={}",
                    row.iteration,
                    row.w1,
                    row.jsd,
                    row.hellinger,
                    row.clamped_count
                );
                on_event(self, TrainEvent::Eval { run: &run, evaluation: &ev, row: &row })?;
                rows.push(row);
            }
        }
        Ok(rows)
    }
}

/// Progress notifications from [`Trainer::run`].
pub enum TrainEvent<'a> {
    Step(&'a StepStats),
    Eval {
        run: &'a SampleRun,
        evaluation: &'a Evaluation,
        row: &'a MetricsRow,
    },
}
