//! Ancestral samplers: the reverse beta chain run in logit space, and the
//! Gaussian baseline's posterior chain.
//!
//! Chains are processed in blocks so each reverse step is one batched
//! network call. Chain `i` of [`BetaSampler::sample_many`] draws from
//! `stream.derive(i)`, so results do not depend on block size or thread
//! count.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::chain::{marginal_params, reverse_conditional_params_at, reverse_update_logit, viz_transform, DiffusionConfig};
use crate::error::{Error, Result};
use crate::gauss::gauss_posterior_at;
use crate::net::{GeneratorNet, InputEncoder};
use crate::random::{sample_beta_logit, RngStream};
use crate::schedule::{sampling_grid, AlphaBranch, Schedule};
use crate::sigmoid;

/// Chains per batched network call.
pub const SAMPLER_BLOCK: usize = 1000;

/// Keeps `x̂0` strictly inside `(0, 1)` so reverse shapes stay positive
/// when the sigmoid saturates.
pub const X0_HAT_MARGIN: f64 = 1e-12;

/// Anything that maps `(input, t)` rows to predictions in `(0, 1)`.
pub trait Denoiser: Sync {
    fn predict(&self, inputs: &[f64], times: &[f64]) -> Vec<f64>;
}

impl Denoiser for GeneratorNet {
    fn predict(&self, inputs: &[f64], times: &[f64]) -> Vec<f64> {
        GeneratorNet::predict(self, inputs, times)
    }
}

/// Ignores its input and always predicts the same value.
#[derive(Clone, Copy, Debug)]
pub struct ConstantDenoiser(pub f64);

impl Denoiser for ConstantDenoiser {
    fn predict(&self, inputs: &[f64], _times: &[f64]) -> Vec<f64> {
        vec![self.0; inputs.len()]
    }
}

/// What a finished chain reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ReturnMode {
    /// The last prediction `(x̂0 - S_hift) / S_cale`.
    #[default]
    XHat,
    /// `(z_{t_0} / α_{t_0} - S_hift) / S_cale`.
    ZRescaled,
}

impl ReturnMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ReturnMode::XHat => "xhat",
            ReturnMode::ZRescaled => "z_rescaled",
        }
    }
}

impl fmt::Display for ReturnMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReturnMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xhat" => Ok(ReturnMode::XHat),
            "z_rescaled" => Ok(ReturnMode::ZRescaled),
            other => Err(Error::config("sampler.return_mode", format!("unknown value {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplerConfig {
    pub nfe: usize,
    pub return_mode: ReturnMode,
    pub capture_trajectory: bool,
    pub alpha_branch: AlphaBranch,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            nfe: 200,
            return_mode: ReturnMode::XHat,
            capture_trajectory: false,
            alpha_branch: AlphaBranch::Auto,
        }
    }
}

/// One recorded state of one chain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryPoint {
    pub chain: usize,
    pub j: usize,
    pub t: f64,
    pub logit_z: f64,
    /// Latent rescaled for display and clamped to `[0, 1]`.
    pub z_viz: f64,
    /// Prediction at this step in raw data units.
    pub x_hat: f64,
}

impl TrajectoryPoint {
    pub const CSV_HEADER: &'static str = "chain,j,t,z_viz,x_hat";

    pub fn to_csv(&self) -> String {
        format!("{},{},{:.10e},{:.10e},{:.10e}", self.chain, self.j, self.t, self.z_viz, self.x_hat)
    }
}

/// Output of a sampling call.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SampleRun {
    /// One value per chain, in chain order.
    pub values: Vec<f64>,
    /// Recorded states, grouped by chain then decreasing `j`; empty unless
    /// requested.
    pub trajectories: Vec<TrajectoryPoint>,
    /// Reverse steps where the latent decreased. Always zero for the beta
    /// chain; counted as a runtime check.
    pub monotone_violations: usize,
}

impl SampleRun {
    fn concat(parts: Vec<SampleRun>) -> SampleRun {
        let mut out = SampleRun::default();
        for p in parts {
            out.values.extend(p.values);
            out.trajectories.extend(p.trajectories);
            out.monotone_violations += p.monotone_violations;
        }
        out
    }
}

trait ChainKernel: Sync {
    fn run_block(&self, first_chain: usize, streams: &mut [RngStream]) -> Result<SampleRun>;
}

fn run_many<K: ChainKernel>(kernel: &K, n: usize, stream: &RngStream) -> Result<SampleRun> {
    if n == 0 {
        return Err(Error::Argument("need at least one chain".into()));
    }
    let starts: Vec<usize> = (0..n).step_by(SAMPLER_BLOCK).collect();
    let parts: Result<Vec<SampleRun>> = starts
        .par_iter()
        .map(|&start| {
            let end = (start + SAMPLER_BLOCK).min(n);
            let mut streams: Vec<RngStream> = (start..end).map(|i| stream.derive(i as u64)).collect();
            kernel.run_block(start, &mut streams)
        })
        .collect();
    Ok(SampleRun::concat(parts?))
}

/// Shared step tables for a grid `t_0 = 0 < t_1 < ... < t_J`.
#[derive(Clone, Debug)]
struct Grid {
    t: Vec<f64>,
    alpha: Vec<f64>,
    /// `alpha_diff[j] = α_{t_{j-1}} - α_{t_j}`; entry 0 unused.
    alpha_diff: Vec<f64>,
}

impl Grid {
    fn new(schedule: &Schedule, nfe: usize) -> Result<Self> {
        let t = sampling_grid(nfe)?;
        let alpha = t.iter().map(|&t| schedule.alpha(t)).collect::<Result<Vec<_>>>()?;
        let mut alpha_diff = vec![0.0; t.len()];
        for j in 1..t.len() {
            alpha_diff[j] = schedule.alpha_diff(t[j - 1], t[j])?;
        }
        Ok(Self { t, alpha, alpha_diff })
    }

    fn nfe(&self) -> usize {
        self.t.len() - 1
    }
}

/// Reverse beta diffusion from `Beta(η α_{t_J} x̂0, η(1 - α_{t_J} x̂0))`
/// with `x̂0` initialized to the scaled data mean.
pub struct BetaSampler<'a, D: Denoiser> {
    net: &'a D,
    cfg: DiffusionConfig,
    encoder: InputEncoder,
    grid: Grid,
    x0_init: f64,
    scfg: SamplerConfig,
}

impl<'a, D: Denoiser> BetaSampler<'a, D> {
    /// `prior_mean` is `E[x0]` in raw units; the schedule the chain runs on
    /// is resolved from `cfg.schedule` and `scfg.alpha_branch`.
    pub fn new(net: &'a D, cfg: &DiffusionConfig, encoder: InputEncoder, prior_mean: f64, scfg: SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        if !(0.0..=1.0).contains(&prior_mean) {
            return Err(Error::Argument(format!("prior mean {prior_mean} outside [0, 1]")));
        }
        let schedule = scfg.alpha_branch.resolve(cfg.schedule, scfg.nfe)?;
        Ok(Self {
            net,
            cfg: *cfg,
            encoder,
            grid: Grid::new(&schedule, scfg.nfe)?,
            x0_init: cfg.preprocess(prior_mean),
            scfg,
        })
    }

    /// Sampling times `t_0, ..., t_J`.
    pub fn times(&self) -> &[f64] {
        &self.grid.t
    }

    /// Run a single chain on `stream`.
    pub fn sample_one(&self, stream: &mut RngStream) -> Result<SampleRun> {
        self.run_block(0, std::slice::from_mut(stream))
    }

    /// `n` independent chains; chain `i` uses `stream.derive(i)`.
    pub fn sample_many(&self, n: usize, stream: &RngStream) -> Result<SampleRun> {
        run_many(self, n, stream)
    }
}

impl<D: Denoiser> ChainKernel for BetaSampler<'_, D> {
    fn run_block(&self, first_chain: usize, streams: &mut [RngStream]) -> Result<SampleRun> {
        let n = streams.len();
        let (eta, scale, shift) = (self.cfg.eta, self.cfg.scale, self.cfg.shift);
        let nfe = self.grid.nfe();
        let prior = marginal_params(eta, self.grid.alpha[nfe], self.x0_init)?;
        let mut logit_z = streams
            .iter_mut()
            .map(|s| sample_beta_logit(s, prior))
            .collect::<Result<Vec<f64>>>()?;
        let mut x_hat = vec![self.x0_init; n];
        let mut run = SampleRun::default();
        let mut traj: Vec<Vec<TrajectoryPoint>> = if self.scfg.capture_trajectory {
            (0..n).map(|_| Vec::with_capacity(nfe + 1)).collect()
        } else {
            Vec::new()
        };
        let mut inputs = vec![0.0; n];
        for j in (1..=nfe).rev() {
            let t = self.grid.t[j];
            let enc = self.encoder.at_time(t)?;
            for (x, &l) in inputs.iter_mut().zip(&logit_z) {
                *x = enc.apply(l);
            }
            let pred = self.net.predict(&inputs, &vec![t; n]);
            for (xh, y) in x_hat.iter_mut().zip(pred) {
                *xh = (scale * y + shift).clamp(X0_HAT_MARGIN, 1.0 - X0_HAT_MARGIN);
            }
            if !traj.is_empty() {
                for (i, tr) in traj.iter_mut().enumerate() {
                    tr.push(TrajectoryPoint {
                        chain: first_chain + i,
                        j,
                        t,
                        logit_z: logit_z[i],
                        z_viz: viz_transform(&self.cfg, logit_z[i], self.grid.alpha[j]),
                        x_hat: self.cfg.postprocess(x_hat[i]),
                    });
                }
            }
            let (alpha_s, diff) = (self.grid.alpha[j - 1], self.grid.alpha_diff[j]);
            for i in 0..n {
                let p = reverse_conditional_params_at(eta, alpha_s, diff, x_hat[i])?;
                let logit_p = sample_beta_logit(&mut streams[i], p)?;
                let next = reverse_update_logit(logit_z[i], logit_p);
                if !next.is_finite() {
                    return Err(Error::Numeric(format!(
                        "chain {} step j={j}: non-finite logit (z logit {}, p logit {logit_p})",
                        first_chain + i,
                        logit_z[i]
                    )));
                }
                if next < logit_z[i] {
                    run.monotone_violations += 1;
                }
                logit_z[i] = next;
            }
        }
        let alpha0 = self.grid.alpha[0];
        for (i, tr) in traj.iter_mut().enumerate() {
            tr.push(TrajectoryPoint {
                chain: first_chain + i,
                j: 0,
                t: self.grid.t[0],
                logit_z: logit_z[i],
                z_viz: viz_transform(&self.cfg, logit_z[i], alpha0),
                x_hat: self.cfg.postprocess(x_hat[i]),
            });
        }
        run.trajectories = traj.into_iter().flatten().collect();
        run.values = match self.scfg.return_mode {
            ReturnMode::XHat => x_hat.iter().map(|&x| self.cfg.postprocess(x)).collect(),
            ReturnMode::ZRescaled => logit_z
                .iter()
                .map(|&l| self.cfg.postprocess(sigmoid(l) / alpha0))
                .collect(),
        };
        Ok(run)
    }
}

/// Ancestral sampling for the Gaussian baseline, from `z_{t_J} ~ N(0, 1)`.
/// Returns the final prediction.
pub struct GaussSampler<'a, D: Denoiser> {
    net: &'a D,
    cfg: DiffusionConfig,
    grid: Grid,
    scfg: SamplerConfig,
}

impl<'a, D: Denoiser> GaussSampler<'a, D> {
    pub fn new(net: &'a D, cfg: &DiffusionConfig, scfg: SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            net,
            cfg: *cfg,
            grid: Grid::new(&cfg.schedule, scfg.nfe)?,
            scfg,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.grid.t
    }

    pub fn sample_one(&self, stream: &mut RngStream) -> Result<SampleRun> {
        self.run_block(0, std::slice::from_mut(stream))
    }

    pub fn sample_many(&self, n: usize, stream: &RngStream) -> Result<SampleRun> {
        run_many(self, n, stream)
    }
}

impl<D: Denoiser> ChainKernel for GaussSampler<'_, D> {
    fn run_block(&self, first_chain: usize, streams: &mut [RngStream]) -> Result<SampleRun> {
        let n = streams.len();
        let nfe = self.grid.nfe();
        let mut z: Vec<f64> = streams.iter_mut().map(|s| s.normal()).collect();
        let mut x_hat = vec![0.0; n];
        let mut traj = Vec::new();
        // display value: z_t / √α_t, rescaled and clamped like the beta chain
        let viz = |z: f64, alpha: f64| ((z / alpha.sqrt() - self.cfg.shift) / self.cfg.scale).clamp(0.0, 1.0);
        for j in (1..=nfe).rev() {
            let t = self.grid.t[j];
            let pred = self.net.predict(&z, &vec![t; n]);
            for (xh, y) in x_hat.iter_mut().zip(pred) {
                *xh = self.cfg.scale * y + self.cfg.shift;
            }
            if self.scfg.capture_trajectory {
                for i in 0..n {
                    traj.push(TrajectoryPoint {
                        chain: first_chain + i,
                        j,
                        t,
                        logit_z: f64::NAN,
                        z_viz: viz(z[i], self.grid.alpha[j]),
                        x_hat: self.cfg.postprocess(x_hat[i]),
                    });
                }
            }
            let post = gauss_posterior_at(self.grid.alpha[j - 1], self.grid.alpha[j])?;
            let sd = post.variance.sqrt();
            for i in 0..n {
                z[i] = post.mean(x_hat[i], z[i]) + sd * streams[i].normal();
                if !z[i].is_finite() {
                    return Err(Error::Numeric(format!("chain {} step j={j}: non-finite latent", first_chain + i)));
                }
            }
        }
        if self.scfg.capture_trajectory {
            for i in 0..n {
                traj.push(TrajectoryPoint {
                    chain: first_chain + i,
                    j: 0,
                    t: 0.0,
                    logit_z: f64::NAN,
                    z_viz: viz(z[i], self.grid.alpha[0]),
                    x_hat: self.cfg.postprocess(x_hat[i]),
                });
            }
            // group by chain like the beta sampler
            traj.sort_by_key(|p: &TrajectoryPoint| (p.chain, std::cmp::Reverse(p.j)));
        }
        let values = match self.scfg.return_mode {
            ReturnMode::XHat => x_hat.iter().map(|&x| self.cfg.postprocess(x)).collect(),
            ReturnMode::ZRescaled => z.iter().map(|&z| self.cfg.postprocess(z / self.grid.alpha[0].sqrt())).collect(),
        };
        Ok(SampleRun {
            values,
            trajectories: traj,
            monotone_violations: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::InputKind;

    fn encoder(cfg: &DiffusionConfig) -> InputEncoder {
        InputEncoder {
            kind: InputKind::Raw,
            eta: cfg.eta,
            schedule: cfg.schedule,
            x_min: 1.0 / 7.0,
            x_max: 5.0 / 7.0,
        }
    }

    fn scfg(nfe: usize) -> SamplerConfig {
        SamplerConfig { nfe, ..SamplerConfig::default() }
    }

    #[test]
    fn constant_net_returns_constant() {
        let cfg = DiffusionConfig::default();
        let net = ConstantDenoiser(0.3);
        let s = BetaSampler::new(&net, &cfg, encoder(&cfg), 3.0 / 7.0, scfg(20)).unwrap();
        let run = s.sample_many(5, &RngStream::new(1, 4)).unwrap();
        assert!(run.values.iter().all(|&v| (v - 0.3).abs() < 1e-15));
        let g = GaussSampler::new(&net, &cfg, scfg(20)).unwrap();
        let run = g.sample_many(5, &RngStream::new(1, 4)).unwrap();
        assert!(run.values.iter().all(|&v| (v - 0.3).abs() < 1e-15));
    }

    #[test]
    fn one_chain_matches_sample_one() {
        let cfg = DiffusionConfig::default();
        let net = ConstantDenoiser(0.55);
        let sc = SamplerConfig { return_mode: ReturnMode::ZRescaled, ..scfg(30) };
        let s = BetaSampler::new(&net, &cfg, encoder(&cfg), 3.0 / 7.0, sc).unwrap();
        let base = RngStream::new(9, 4);
        let many = s.sample_many(1, &base).unwrap();
        let one = s.sample_one(&mut base.derive(0)).unwrap();
        assert_eq!(many.values[0].to_bits(), one.values[0].to_bits());
        let again = s.sample_many(1, &base).unwrap();
        assert_eq!(many, again);
    }

    #[test]
    fn chain_results_independent_of_block_split() {
        let cfg = DiffusionConfig::default();
        let net = ConstantDenoiser(0.4);
        let sc = SamplerConfig { return_mode: ReturnMode::ZRescaled, ..scfg(10) };
        let s = BetaSampler::new(&net, &cfg, encoder(&cfg), 3.0 / 7.0, sc).unwrap();
        let base = RngStream::new(3, 4);
        let big = s.sample_many(SAMPLER_BLOCK + 7, &base).unwrap();
        let mut st = base.derive((SAMPLER_BLOCK + 3) as u64);
        let single = s.sample_one(&mut st).unwrap();
        assert_eq!(big.values[SAMPLER_BLOCK + 3].to_bits(), single.values[0].to_bits());
        assert_eq!(big.monotone_violations, 0);
    }

    #[test]
    fn trajectory_bookkeeping() {
        let cfg = DiffusionConfig::default();
        let net = ConstantDenoiser(0.5);
        let sc = SamplerConfig { capture_trajectory: true, ..scfg(12) };
        let s = BetaSampler::new(&net, &cfg, encoder(&cfg), 3.0 / 7.0, sc).unwrap();
        let run = s.sample_many(3, &RngStream::new(2, 4)).unwrap();
        assert_eq!(run.trajectories.len(), 3 * 13);
        for chain in run.trajectories.chunks(13) {
            for w in chain.windows(2) {
                assert!(w[1].t < w[0].t);
                assert_eq!(w[1].j + 1, w[0].j);
                assert!(w[1].logit_z >= w[0].logit_z);
            }
            assert_eq!(chain[12].t, 0.0);
        }
        let g = GaussSampler::new(&net, &cfg, sc).unwrap();
        let run = g.sample_many(2, &RngStream::new(2, 4)).unwrap();
        assert_eq!(run.trajectories.len(), 2 * 13);
        assert_eq!(run.trajectories[0].j, 12);
        assert_eq!(run.trajectories[13].chain, 1);
    }

    #[test]
    fn saturated_prediction_stays_finite() {
        let cfg = DiffusionConfig::default();
        for c in [0.0, 1.0] {
            let net = ConstantDenoiser(c);
            let s = BetaSampler::new(&net, &cfg, encoder(&cfg), 3.0 / 7.0, scfg(50)).unwrap();
            let run = s.sample_many(20, &RngStream::new(5, 4)).unwrap();
            assert!(run.values.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn rejects_single_step_grid() {
        let cfg = DiffusionConfig::default();
        let net = ConstantDenoiser(0.5);
        assert!(BetaSampler::new(&net, &cfg, encoder(&cfg), 0.5, scfg(1)).is_err());
        let s = BetaSampler::new(&net, &cfg, encoder(&cfg), 0.5, scfg(5)).unwrap();
        assert!(s.sample_many(0, &RngStream::new(1, 1)).is_err());
    }

    #[test]
    fn return_mode_round_trip() {
        for m in [ReturnMode::XHat, ReturnMode::ZRescaled] {
            assert_eq!(m.as_str().parse::<ReturnMode>().unwrap(), m);
        }
    }
}
