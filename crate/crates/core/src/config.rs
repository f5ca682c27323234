//! Flat `key = value` experiment configuration and the named presets.
//!
//! ```text
//! # comment
//! model = beta
//! loss.variant = klub
//! schedule.kind = beta_linear
//! net.hidden = 256,256
//! ```
//!
//! Unknown or repeated keys are errors. [`ExperimentConfig::to_text`] writes
//! every key in a fixed order; parsing that text gives back the same config.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::chain::DiffusionConfig;
use crate::data::{DataKind, Dataset};
use crate::error::{Error, Result};
use crate::gauss::GaussWeighting;
use crate::loss::LossVariant;
use crate::net::{InputKind, NetConfig};
use crate::sampler::{ReturnMode, SamplerConfig};
use crate::schedule::{AlphaBranch, Schedule};
use crate::trainer::{ModelKind, TrainConfig};

/// Where training data comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Synthetic(DataKind),
    File(PathBuf),
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSource::Synthetic(k) => Ok(Dataset::from_kind(*k)),
            DataSource::File(p) => Dataset::from_file(p),
        }
    }
}

/// Everything needed to train, sample and evaluate one model.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub data: DataSource,
    pub diffusion: DiffusionConfig,
    pub train: TrainConfig,
    pub net: NetConfig,
    pub sampler: SamplerConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "custom".into(),
            data: DataSource::Synthetic(DataKind::FivePoint),
            diffusion: DiffusionConfig::default(),
            train: TrainConfig::default(),
            net: NetConfig::default(),
            sampler: SamplerConfig::default(),
        }
    }
}

fn fmt_f64(v: f64) -> String {
    // shortest representation that parses back to the same value
    format!("{v:?}")
}

fn fmt_list(v: &[usize]) -> String {
    v.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.diffusion.validate()?;
        self.train.validate()?;
        self.net.validate()?;
        if self.sampler.nfe < 2 {
            return Err(Error::config("sampler.nfe", format!("must be >= 2, got {}", self.sampler.nfe)));
        }
        if matches!(self.diffusion.schedule, Schedule::SigmoidPower { .. }) {
            return Err(Error::config("schedule.kind", "sigmoid_power is sampler-only"));
        }
        self.sampler.alpha_branch.resolve(self.diffusion.schedule, self.sampler.nfe)?;
        Ok(())
    }

    /// Canonical text form, one `key = value` per line.
    pub fn to_text(&self) -> String {
        let d = &self.diffusion;
        let t = &self.train;
        let mut lines = vec![
            ("name", self.name.clone()),
            ("model", t.model.to_string()),
            ("seed", t.seed.to_string()),
            ("deterministic", t.deterministic.to_string()),
        ];
        match &self.data {
            DataSource::Synthetic(k) => lines.push(("data.kind", k.to_string())),
            DataSource::File(p) => lines.push(("data.file", p.display().to_string())),
        }
        lines.extend([
            ("diffusion.eta", fmt_f64(d.eta)),
            ("diffusion.scale", fmt_f64(d.scale)),
            ("diffusion.shift", fmt_f64(d.shift)),
            ("loss.variant", t.variant.to_string()),
            ("loss.omega", fmt_f64(d.omega)),
            ("loss.pi", fmt_f64(d.pi)),
            ("schedule.kind", d.schedule.name().to_string()),
        ]);
        match d.schedule {
            Schedule::BetaLinear { beta_d, beta_min } => {
                lines.push(("schedule.beta_d", fmt_f64(beta_d)));
                lines.push(("schedule.beta_min", fmt_f64(beta_min)));
            }
            Schedule::Sigmoid { c0, c1 } => {
                lines.push(("schedule.c0", fmt_f64(c0)));
                lines.push(("schedule.c1", fmt_f64(c1)));
            }
            Schedule::SigmoidPower { c1 } => lines.push(("schedule.c1", fmt_f64(c1))),
        }
        lines.extend([
            ("gauss.weighting", t.gauss_weighting.to_string()),
            ("net.input", self.net.input.to_string()),
            ("net.hidden", fmt_list(&self.net.hidden)),
            ("net.embed_dim", self.net.embed_dim.to_string()),
            ("net.time_scale", fmt_f64(self.net.time_scale)),
            ("train.batch_size", t.batch_size.to_string()),
            ("train.iterations", t.iterations.to_string()),
            ("train.lr", fmt_f64(t.lr)),
            ("train.eval_every", t.eval_every.to_string()),
            ("train.log_every", t.log_every.to_string()),
            ("train.grad_clip", t.grad_clip.map_or_else(|| "none".to_string(), fmt_f64)),
            ("eval.samples", t.eval_samples.to_string()),
            ("sampler.nfe", self.sampler.nfe.to_string()),
            ("sampler.return_mode", self.sampler.return_mode.to_string()),
            ("sampler.alpha_branch", self.sampler.alpha_branch.as_str().to_string()),
        ]);
        let mut out = String::new();
        for (k, v) in lines {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }

    /// Parse config text; keys not given keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv: HashMap<String, (usize, String)> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}", i + 1), format!("expected `key = value`, got {line:?}")))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if k.is_empty() {
                return Err(Error::config(format!("line {}", i + 1), "empty key"));
            }
            if kv.insert(k.clone(), (i + 1, v)).is_some() {
                return Err(Error::config(k, "repeated key"));
            }
        }
        let mut p = Parser { kv };
        let mut cfg = ExperimentConfig::default();
        if let Some(v) = p.take("name") {
            cfg.name = v;
        }
        let t = &mut cfg.train;
        p.parse_into("model", &mut t.model)?;
        p.parse_into("seed", &mut t.seed)?;
        p.parse_into("deterministic", &mut t.deterministic)?;
        let kind = p.take("data.kind");
        let file = p.take("data.file");
        cfg.data = match (kind, file) {
            (Some(_), Some(_)) => return Err(Error::config("data.file", "give either data.kind or data.file, not both")),
            (None, Some(f)) => DataSource::File(PathBuf::from(f)),
            (Some(k), None) => DataSource::Synthetic(k.parse()?),
            (None, None) => cfg.data,
        };
        let d = &mut cfg.diffusion;
        p.parse_into("diffusion.eta", &mut d.eta)?;
        p.parse_into("diffusion.scale", &mut d.scale)?;
        p.parse_into("diffusion.shift", &mut d.shift)?;
        p.parse_into("loss.variant", &mut t.variant)?;
        p.parse_into("loss.omega", &mut d.omega)?;
        p.parse_into("loss.pi", &mut d.pi)?;
        let sched_kind = p.take("schedule.kind");
        let beta_d = p.num("schedule.beta_d")?;
        let beta_min = p.num("schedule.beta_min")?;
        let c0 = p.num("schedule.c0")?;
        let c1 = p.num("schedule.c1")?;
        let kind = sched_kind.unwrap_or_else(|| d.schedule.name().to_string());
        d.schedule = match kind.as_str() {
            "beta_linear" => {
                if c0.is_some() || c1.is_some() {
                    return Err(Error::config("schedule.c0", "only valid with schedule.kind = sigmoid"));
                }
                Schedule::beta_linear(beta_d.unwrap_or(19.9), beta_min.unwrap_or(0.1))
            }
            "sigmoid" => {
                if beta_d.is_some() || beta_min.is_some() {
                    return Err(Error::config("schedule.beta_d", "only valid with schedule.kind = beta_linear"));
                }
                Schedule::sigmoid(c0.unwrap_or(10.0), c1.unwrap_or(-13.0))
            }
            other => {
                return Err(Error::config("schedule.kind", format!("unknown schedule {other:?}")));
            }
        }
        .map_err(|e| match e {
            Error::Config { msg, .. } => Error::config("schedule", msg),
            e => e,
        })?;
        p.parse_into("gauss.weighting", &mut t.gauss_weighting)?;
        p.parse_into("net.input", &mut cfg.net.input)?;
        if let Some(v) = p.take("net.hidden") {
            cfg.net.hidden = v
                .split(',')
                .map(|w| w.trim().parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::config("net.hidden", format!("expected comma-separated widths, got {v:?}")))?;
        }
        p.parse_into("net.embed_dim", &mut cfg.net.embed_dim)?;
        p.parse_into("net.time_scale", &mut cfg.net.time_scale)?;
        p.parse_into("train.batch_size", &mut t.batch_size)?;
        p.parse_into("train.iterations", &mut t.iterations)?;
        p.parse_into("train.lr", &mut t.lr)?;
        p.parse_into("train.eval_every", &mut t.eval_every)?;
        p.parse_into("train.log_every", &mut t.log_every)?;
        if let Some(v) = p.take("train.grad_clip") {
            t.grad_clip = match v.as_str() {
                "none" | "off" => None,
                s => Some(s.parse().map_err(|_| Error::config("train.grad_clip", format!("expected a number or none, got {s:?}")))?),
            };
        }
        p.parse_into("eval.samples", &mut t.eval_samples)?;
        p.parse_into("sampler.nfe", &mut cfg.sampler.nfe)?;
        p.parse_into("sampler.return_mode", &mut cfg.sampler.return_mode)?;
        p.parse_into("sampler.alpha_branch", &mut cfg.sampler.alpha_branch)?;
        if let Some((k, (line, _))) = p.kv.iter().min_by_key(|(_, (line, _))| *line) {
            return Err(Error::config(k.clone(), format!("unknown key (line {line})")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

struct Parser {
    kv: HashMap<String, (usize, String)>,
}

impl Parser {
    fn take(&mut self, key: &str) -> Option<String> {
        self.kv.remove(key).map(|(_, v)| v)
    }

    fn parse_into<T: ParseValue>(&mut self, key: &str, slot: &mut T) -> Result<()> {
        if let Some(v) = self.take(key) {
            *slot = T::parse_value(key, &v)?;
        }
        Ok(())
    }

    fn num(&mut self, key: &str) -> Result<Option<f64>> {
        self.take(key).map(|v| f64::parse_value(key, &v)).transpose()
    }
}

trait ParseValue: Sized {
    fn parse_value(key: &str, v: &str) -> Result<Self>;
}

macro_rules! parse_plain {
    ($($t:ty),*) => {$(
        impl ParseValue for $t {
            fn parse_value(key: &str, v: &str) -> Result<Self> {
                v.parse().map_err(|_| Error::config(key, format!("cannot parse {v:?} as {}", stringify!($t))))
            }
        }
    )*};
}
parse_plain!(f64, u64, usize, bool);

macro_rules! parse_enum {
    ($($t:ty),*) => {$(
        impl ParseValue for $t {
            fn parse_value(key: &str, v: &str) -> Result<Self> {
                v.parse().map_err(|e: Error| match e {
                    Error::Config { msg, .. } => Error::config(key, msg),
                    e => e,
                })
            }
        }
    )*};
}
parse_enum!(ModelKind, LossVariant, GaussWeighting, InputKind, ReturnMode, AlphaBranch);

/// A named, fully specified experiment.
#[derive(Clone, Debug)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
}

pub const PRESETS: [Preset; 8] = [
    Preset { name: "five_point_klub", description: "five atoms, beta diffusion, KLUB (ω = 0.5)" },
    Preset { name: "five_point_elbo", description: "five atoms, beta diffusion, negative ELBO" },
    Preset { name: "five_point_gauss", description: "five atoms, Gaussian diffusion, SNR-weighted" },
    Preset { name: "mixture_e1_klub", description: "range-bounded mixture, beta diffusion, KLUB" },
    Preset { name: "mixture_e1_elbo", description: "range-bounded mixture, beta diffusion, negative ELBO" },
    Preset { name: "mixture_e1_gauss", description: "range-bounded mixture, Gaussian diffusion" },
    Preset { name: "ablation_klub_cond", description: "five atoms, conditional KLUB only (ω = 1)" },
    Preset { name: "ablation_klub_marg", description: "five atoms, marginal KLUB only (ω = 0)" },
];

/// Iterations in the presets; the synthetic runs train for 400k steps.
pub const PRESET_ITERATIONS: u64 = 400_000;

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    if !PRESETS.iter().any(|p| p.name == name) {
        return Err(unknown_preset(name));
    }
    let mut cfg = ExperimentConfig {
        name: name.to_string(),
        ..ExperimentConfig::default()
    };
    cfg.train.iterations = PRESET_ITERATIONS;
    let (data, rest) = if let Some(rest) = name.strip_prefix("five_point_") {
        (DataKind::FivePoint, rest)
    } else if let Some(rest) = name.strip_prefix("mixture_e1_") {
        (DataKind::MixtureE1, rest)
    } else if let Some(rest) = name.strip_prefix("ablation_") {
        (DataKind::FivePoint, rest)
    } else {
        return Err(unknown_preset(name));
    };
    cfg.data = DataSource::Synthetic(data);
    match rest {
        "klub" => {}
        "elbo" => cfg.train.variant = LossVariant::NegElbo,
        "gauss" => cfg.train.model = ModelKind::Gauss,
        "klub_cond" => cfg.diffusion.omega = 1.0,
        "klub_marg" => cfg.diffusion.omega = 0.0,
        _ => return Err(unknown_preset(name)),
    }
    // Raw z leaves the network unable to tell latents apart once they are
    // all squeezed near zero, and the atom masses drift toward the middle.
    // The standardized logit keeps every t on the same footing.
    if cfg.train.model == ModelKind::Beta {
        cfg.net.input = InputKind::Precond;
    }
    Ok(cfg)
}

fn unknown_preset(name: &str) -> Error {
    let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
    Error::config("preset", format!("unknown preset {name:?}; available: {}", names.join(", ")))
}
