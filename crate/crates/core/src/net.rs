//! The generator `f_θ(z_t, t)`: sinusoidal time embedding, ReLU MLP and a
//! sigmoid output, with hand-written backprop and Adam.
//!
//! Parameters live in one flat vector so gradients and optimizer moments
//! share its layout. Batches are row-major `B × width` and every dense
//! layer is a single GEMM.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::random::RngStream;
use crate::schedule::Schedule;
use crate::sigmoid;
use crate::specfn::{digamma, ln_gamma, trigamma};

/// Scalar the network sees in place of `z_t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum InputKind {
    /// `z_t` itself.
    #[default]
    Raw,
    /// `logit(z_t)`.
    Logit,
    /// `logit(z_t)` standardized by [`PrecondStats`] at the current time.
    Precond,
}

impl InputKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            InputKind::Raw => "raw",
            InputKind::Logit => "logit",
            InputKind::Precond => "precond",
        }
    }
}

impl fmt::Display for InputKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InputKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(InputKind::Raw),
            "logit" => Ok(InputKind::Logit),
            "precond" => Ok(InputKind::Precond),
            other => Err(Error::config("net.input", format!("unknown value {other:?}"))),
        }
    }
}

/// Sinusoidal embedding of position `time_scale · t` into `out`.
///
/// The first `⌈d/2⌉` entries are sines and the rest cosines, at frequencies
/// `10000^{-2i/d}`.
pub fn time_embed_into(t: f64, time_scale: f64, out: &mut [f64]) {
    let d = out.len();
    let n_sin = d.div_ceil(2);
    let pos = time_scale * t;
    for i in 0..n_sin {
        let freq = 10_000f64.powf(-2.0 * i as f64 / d as f64);
        out[i] = (pos * freq).sin();
        if n_sin + i < d {
            out[n_sin + i] = (pos * freq).cos();
        }
    }
}

/// 20-dimensional embedding at position `1000 t`.
pub fn time_embed(t: f64) -> Vec<f64> {
    let mut v = vec![0.0; 20];
    time_embed_into(t, 1000.0, &mut v);
    v
}

/// Architecture and input convention of a [`GeneratorNet`].
#[derive(Clone, Debug, PartialEq)]
pub struct NetConfig {
    pub input: InputKind,
    pub hidden: Vec<usize>,
    pub embed_dim: usize,
    /// Multiplier on `t` before the sinusoidal embedding.
    pub time_scale: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            input: InputKind::Raw,
            hidden: vec![256, 256],
            embed_dim: 20,
            time_scale: 1000.0,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::config("net.hidden", format!("need at least one non-zero width, got {:?}", self.hidden)));
        }
        if !(self.time_scale.is_finite() && self.time_scale > 0.0) {
            return Err(Error::config("net.time_scale", format!("must be positive, got {}", self.time_scale)));
        }
        Ok(())
    }

    pub fn build(&self, stream: &mut RngStream) -> Result<GeneratorNet> {
        self.validate()?;
        Ok(GeneratorNet::new(self.embed_dim, self.time_scale, &self.hidden, stream))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct LayerSpan {
    fan_in: usize,
    fan_out: usize,
    /// Offset of the `fan_out × fan_in` row-major weight block.
    w: usize,
    /// Offset of the bias vector.
    b: usize,
}

/// Outputs are kept this far inside `(0, 1)`. A saturated sigmoid would
/// otherwise round to exactly 0 or 1 and put `x̂0` on the edge of its range.
pub const OUTPUT_MARGIN: f64 = 1e-12;

/// MLP `[1 + embed_dim] -> hidden... -> 1`, ReLU between layers, sigmoid out.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorNet {
    embed_dim: usize,
    time_scale: f64,
    widths: Vec<usize>,
    layers: Vec<LayerSpan>,
    params: Vec<f64>,
}

/// Activations kept from a batched forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    batch: usize,
    /// `acts[0]` is the input matrix, `acts[l]` the ReLU output of layer `l`.
    acts: Vec<Vec<f64>>,
    /// Sigmoid outputs, one per row.
    pub output: Vec<f64>,
}

impl ForwardCache {
    pub fn batch(&self) -> usize {
        self.batch
    }
}

fn layout(widths: &[usize]) -> (Vec<LayerSpan>, usize) {
    let mut off = 0;
    let mut layers = Vec::with_capacity(widths.len() - 1);
    for w in widths.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let span = LayerSpan {
            fan_in,
            fan_out,
            w: off,
            b: off + fan_in * fan_out,
        };
        off = span.b + fan_out;
        layers.push(span);
    }
    (layers, off)
}

/// `C (m×n) = A (m×k) · op(B)` with explicit strides; `beta` scales C.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
    beta: f64,
    c: &mut [f64],
) {
    debug_assert!(c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: strides describe matrices that fit in the given slices; the
    // callers below derive them from the same dimensions used to size them.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl GeneratorNet {
    /// The synthetic-data generator: (21-256)-ReLU-(256-256)-ReLU-(256-1).
    pub fn toy(stream: &mut RngStream) -> Self {
        Self::new(20, 1000.0, &[256, 256], stream)
    }

    /// Kaiming-uniform weights on hidden layers, zero biases, and a small
    /// uniform final layer.
    pub fn new(embed_dim: usize, time_scale: f64, hidden: &[usize], stream: &mut RngStream) -> Self {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(1 + embed_dim);
        widths.extend_from_slice(hidden);
        widths.push(1);
        let (layers, n) = layout(&widths);
        let mut params = vec![0.0; n];
        let last = layers.len() - 1;
        for (l, span) in layers.iter().enumerate() {
            let bound = if l == last {
                1.0 / (span.fan_in as f64).sqrt()
            } else {
                (6.0 / span.fan_in as f64).sqrt()
            };
            for w in &mut params[span.w..span.b] {
                *w = stream.uniform(-bound, bound);
            }
        }
        Self {
            embed_dim,
            time_scale,
            widths,
            layers,
            params,
        }
    }

    /// Rebuild from stored parameters.
    pub fn from_parts(embed_dim: usize, time_scale: f64, hidden: &[usize], params: Vec<f64>) -> Result<Self> {
        let mut widths = vec![1 + embed_dim];
        widths.extend_from_slice(hidden);
        widths.push(1);
        let (layers, n) = layout(&widths);
        if params.len() != n {
            return Err(Error::parse(
                "network parameters",
                format!("expected {n} values for widths {widths:?}, got {}", params.len()),
            ));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::parse("network parameters", "non-finite value"));
        }
        Ok(Self {
            embed_dim,
            time_scale,
            widths,
            layers,
            params,
        })
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn time_scale(&self) -> f64 {
        self.time_scale
    }

    /// Layer widths including input and output.
    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn hidden(&self) -> &[usize] {
        &self.widths[1..self.widths.len() - 1]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Zero the last layer so the output is `sigmoid(0) = 0.5` everywhere.
    pub fn zero_output_layer(&mut self) {
        let span = *self.layers.last().expect("at least one layer");
        self.params[span.w..span.b + span.fan_out].fill(0.0);
    }

    fn input_matrix(&self, inputs: &[f64], times: &[f64]) -> Vec<f64> {
        let width = self.widths[0];
        let mut x = vec![0.0; inputs.len() * width];
        for (row, (&z, &t)) in x.chunks_exact_mut(width).zip(inputs.iter().zip(times)) {
            row[0] = z;
            time_embed_into(t, self.time_scale, &mut row[1..]);
        }
        x
    }

    /// Batched forward pass; returns the cache needed for [`Self::backward`].
    pub fn forward_batch(&self, inputs: &[f64], times: &[f64]) -> ForwardCache {
        assert_eq!(inputs.len(), times.len(), "inputs and times must pair up");
        let batch = inputs.len();
        let mut acts = Vec::with_capacity(self.layers.len());
        acts.push(self.input_matrix(inputs, times));
        let last = self.layers.len() - 1;
        let mut output = Vec::new();
        for (l, span) in self.layers.iter().enumerate() {
            let x = &acts[l];
            let mut y = vec![0.0; batch * span.fan_out];
            let bias = &self.params[span.b..span.b + span.fan_out];
            for row in y.chunks_exact_mut(span.fan_out) {
                row.copy_from_slice(bias);
            }
            // y += x · Wᵀ, W stored fan_out × fan_in
            gemm(
                batch,
                span.fan_in,
                span.fan_out,
                x,
                span.fan_in as isize,
                1,
                &self.params[span.w..span.b],
                1,
                span.fan_in as isize,
                1.0,
                &mut y,
            );
            if l == last {
                output = y
                    .iter()
                    .map(|&h| sigmoid(h).clamp(OUTPUT_MARGIN, 1.0 - OUTPUT_MARGIN))
                    .collect();
            } else {
                for v in &mut y {
                    *v = v.max(0.0);
                }
                acts.push(y);
            }
        }
        ForwardCache { batch, acts, output }
    }

    /// Sigmoid outputs for a batch, in `[OUTPUT_MARGIN, 1 - OUTPUT_MARGIN]`.
    pub fn predict(&self, inputs: &[f64], times: &[f64]) -> Vec<f64> {
        self.forward_batch(inputs, times).output
    }

    pub fn forward(&self, input: f64, t: f64) -> f64 {
        self.predict(&[input], &[t])[0]
    }

    /// Parameter gradient of `Σ_i upstream_i · output_i`.
    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64]) -> Vec<f64> {
        assert_eq!(upstream.len(), cache.batch, "one upstream gradient per row");
        let batch = cache.batch;
        let mut grad = vec![0.0; self.params.len()];
        // through the sigmoid; flat where the margin clamp is active
        let mut delta: Vec<f64> = upstream
            .iter()
            .zip(&cache.output)
            .map(|(&g, &y)| {
                if y <= OUTPUT_MARGIN || y >= 1.0 - OUTPUT_MARGIN {
                    0.0
                } else {
                    g * y * (1.0 - y)
                }
            })
            .collect();
        for l in (0..self.layers.len()).rev() {
            let span = self.layers[l];
            let x = &cache.acts[l];
            // dW = deltaᵀ · x   (fan_out × fan_in)
            gemm(
                span.fan_out,
                batch,
                span.fan_in,
                &delta,
                1,
                span.fan_out as isize,
                x,
                span.fan_in as isize,
                1,
                0.0,
                &mut grad[span.w..span.b],
            );
            let db = &mut grad[span.b..span.b + span.fan_out];
            for row in delta.chunks_exact(span.fan_out) {
                for (d, r) in db.iter_mut().zip(row) {
                    *d += r;
                }
            }
            if l == 0 {
                break;
            }
            // dx = delta · W, masked by the ReLU that produced x
            let mut dx = vec![0.0; batch * span.fan_in];
            gemm(
                batch,
                span.fan_out,
                span.fan_in,
                &delta,
                span.fan_out as isize,
                1,
                &self.params[span.w..span.b],
                span.fan_in as isize,
                1,
                0.0,
                &mut dx,
            );
            for (d, &a) in dx.iter_mut().zip(x) {
                if a <= 0.0 {
                    *d = 0.0;
                }
            }
            delta = dx;
        }
        grad
    }
}

/// Adam with bias correction.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(num_params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
        }
    }

    /// Apply one update to `params` in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Argument(format!(
                "adam: {} params, {} grads, state for {}",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::Numeric(format!("non-finite gradient at parameter {i}: {}", grads[i])));
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let step_size = self.lr / bc1;
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= step_size * *m / ((*v / bc2).sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Scale `grads` so its L2 norm is at most `max_norm`; returns the
/// pre-clip norm.
pub fn clip_grad_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grads {
            *g *= s;
        }
    }
    norm
}

/// Mean and standard deviation of `logit(z_t)` when
/// `z_t ~ Beta(η α_t x0, η(1 - α_t x0))` and `x0 ~ Unif[x_min, x_max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrecondStats {
    pub mean_logit: f64,
    pub std_logit: f64,
}

impl PrecondStats {
    pub fn apply(&self, logit_z: f64) -> f64 {
        (logit_z - self.mean_logit) / self.std_logit
    }
}

/// Below this interval width (in shape units) the uniform averages are
/// replaced by midpoint expansions.
const PRECOND_MIN_WIDTH: f64 = 1e-4;

/// Trapezoid average of `f` over 101 equally spaced points on `[lo, hi]`.
fn trapezoid101<F: Fn(f64) -> f64>(lo: f64, hi: f64, f: F) -> f64 {
    (0..=100)
        .map(|i| {
            let w = if i == 0 || i == 100 { 0.5 } else { 1.0 };
            w * f(lo + (hi - lo) * i as f64 / 100.0)
        })
        .sum::<f64>()
        / 100.0
}

struct PrecondParts {
    mean_psi_a: f64,
    mean_psi_b: f64,
    mean_tri_a: f64,
    mean_tri_b: f64,
}

fn precond_parts(eta: f64, alpha_t: f64, x_min: f64, x_max: f64) -> Result<PrecondParts> {
    if !(0.0 < x_min && x_min < x_max && x_max < 1.0) {
        return Err(Error::domain(
            "precond_stats",
            format!("need 0 < x_min < x_max < 1, got [{x_min}, {x_max}]"),
        ));
    }
    if !(eta > 0.0 && alpha_t > 0.0 && alpha_t <= 1.0) {
        return Err(Error::domain("precond_stats", format!("need η > 0, α_t ∈ (0,1], got {eta}, {alpha_t}")));
    }
    let k = eta * alpha_t;
    let width = k * (x_max - x_min);
    let (a_lo, a_hi) = (k * x_min, k * x_max);
    let (b_lo, b_hi) = (eta * (1.0 - alpha_t * x_max), eta * (1.0 - alpha_t * x_min));
    if width < PRECOND_MIN_WIDTH {
        let (a, b) = (0.5 * (a_lo + a_hi), 0.5 * (b_lo + b_hi));
        return Ok(PrecondParts {
            mean_psi_a: digamma(a)?,
            mean_psi_b: digamma(b)?,
            mean_tri_a: trigamma(a)?,
            mean_tri_b: trigamma(b)?,
        });
    }
    Ok(PrecondParts {
        mean_psi_a: (ln_gamma(a_hi)? - ln_gamma(a_lo)?) / width,
        mean_psi_b: (ln_gamma(b_hi)? - ln_gamma(b_lo)?) / width,
        mean_tri_a: (digamma(a_hi)? - digamma(a_lo)?) / width,
        mean_tri_b: (digamma(b_hi)? - digamma(b_lo)?) / width,
    })
}

/// Preconditioning statistics of `logit(z_t)`.
///
/// Means and `E[ψ']` terms use the exact `ln Γ` / `ψ` antiderivatives; the
/// spread of the conditional mean `ψ(η α_t x0) - ψ(η(1 - α_t x0))` over `x0`
/// uses an endpoint-halved 101-point sum floored at zero. The two digamma
/// terms move in opposite directions with `x0`, so their covariance is kept.
pub fn precond_stats(eta: f64, alpha_t: f64, x_min: f64, x_max: f64) -> Result<PrecondStats> {
    let parts = precond_parts(eta, alpha_t, x_min, x_max)?;
    let mean = parts.mean_psi_a - parts.mean_psi_b;
    let spread = conditional_mean_spread(eta, alpha_t, x_min, x_max, |a, b| {
        let d = digamma(a).unwrap_or(f64::NAN) - digamma(b).unwrap_or(f64::NAN);
        d * d
    }, mean * mean);
    let var = parts.mean_tri_a + parts.mean_tri_b + spread;
    finish(mean, var)
}

/// The same statistics with `var_x[ψ(a)]` and `var_x[ψ(b)]` summed as if
/// independent. Underestimates the spread; kept for comparison.
pub fn precond_stats_uncorrelated(eta: f64, alpha_t: f64, x_min: f64, x_max: f64) -> Result<PrecondStats> {
    let parts = precond_parts(eta, alpha_t, x_min, x_max)?;
    let mean = parts.mean_psi_a - parts.mean_psi_b;
    let var_a = conditional_mean_spread(
        eta,
        alpha_t,
        x_min,
        x_max,
        |a, _| digamma(a).unwrap_or(f64::NAN).powi(2),
        parts.mean_psi_a.powi(2),
    );
    let var_b = conditional_mean_spread(
        eta,
        alpha_t,
        x_min,
        x_max,
        |_, b| digamma(b).unwrap_or(f64::NAN).powi(2),
        parts.mean_psi_b.powi(2),
    );
    finish(mean, parts.mean_tri_a + parts.mean_tri_b + var_a + var_b)
}

fn conditional_mean_spread<F: Fn(f64, f64) -> f64>(
    eta: f64,
    alpha_t: f64,
    x_min: f64,
    x_max: f64,
    second_moment: F,
    mean_sq: f64,
) -> f64 {
    if eta * alpha_t * (x_max - x_min) < PRECOND_MIN_WIDTH {
        return 0.0;
    }
    let m2 = trapezoid101(x_min, x_max, |x| second_moment(eta * alpha_t * x, eta * (1.0 - alpha_t * x)));
    (m2 - mean_sq).max(0.0)
}

fn finish(mean: f64, var: f64) -> Result<PrecondStats> {
    if !(mean.is_finite() && var.is_finite() && var > 0.0) {
        return Err(Error::Numeric(format!("precond_stats: mean={mean}, var={var}")));
    }
    Ok(PrecondStats {
        mean_logit: mean,
        std_logit: var.sqrt(),
    })
}

/// Maps a beta latent to the generator's scalar input.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InputEncoder {
    pub kind: InputKind,
    pub eta: f64,
    pub schedule: Schedule,
    pub x_min: f64,
    pub x_max: f64,
}

impl InputEncoder {
    pub fn encode(&self, logit_z: f64, t: f64) -> Result<f64> {
        Ok(self.at_time(t)?.apply(logit_z))
    }

    /// The encoding at a fixed time, for applying to many latents.
    pub fn at_time(&self, t: f64) -> Result<TimeEncoding> {
        Ok(match self.kind {
            InputKind::Raw => TimeEncoding::Raw,
            InputKind::Logit => TimeEncoding::Logit,
            InputKind::Precond => {
                let alpha = self.schedule.alpha(t)?;
                TimeEncoding::Precond(precond_stats(self.eta, alpha, self.x_min, self.x_max)?)
            }
        })
    }
}

/// [`InputEncoder`] resolved at one time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeEncoding {
    Raw,
    Logit,
    Precond(PrecondStats),
}

impl TimeEncoding {
    #[inline]
    pub fn apply(&self, logit_z: f64) -> f64 {
        match self {
            TimeEncoding::Raw => sigmoid(logit_z),
            TimeEncoding::Logit => logit_z,
            TimeEncoding::Precond(s) => s.apply(logit_z),
        }
    }
}
