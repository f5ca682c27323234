//! Text checkpoints: config echo, network weights, Adam moments, RNG
//! position and iteration counter.
//!
//! ```text
//! betadiff-checkpoint 1
//! [config]
//! model = beta
//! ...
//! [state]
//! iteration = 5000
//! ...
//! [array net.params 71425]
//! 1.2345678901234567e-2
//! ...
//! [end]
//! ```
//!
//! Floats are written with 17 significant digits so a save/load round trip
//! is exact.

use std::fmt::Write as _;
use std::path::Path;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::net::{AdamState, GeneratorNet};
use crate::random::{RngStream, StreamState};
use crate::trainer::Trainer;

pub const FORMAT_HEADER: &str = "betadiff-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

fn push_array(out: &mut String, name: &str, values: &[f64]) {
    let _ = writeln!(out, "[array {name} {}]", values.len());
    for v in values {
        let _ = writeln!(out, "{v:.16e}");
    }
}

/// Serialize a trainer's full state.
pub fn to_text(config: &ExperimentConfig, trainer: &Trainer) -> String {
    let mut out = format!("{FORMAT_HEADER} {FORMAT_VERSION}\n[config]\n");
    out.push_str(&config.to_text());
    let st = trainer.stream.state();
    let a = &trainer.adam;
    out.push_str("[state]\n");
    let _ = writeln!(out, "iteration = {}", trainer.iteration);
    let _ = writeln!(out, "rng.seed = {}", st.seed);
    let _ = writeln!(out, "rng.stream = {}", st.stream);
    let _ = writeln!(out, "rng.word_pos = {}", st.word_pos);
    let _ = writeln!(out, "adam.step = {}", a.step);
    let _ = writeln!(out, "adam.lr = {:.16e}", a.lr);
    let _ = writeln!(out, "adam.beta1 = {:.16e}", a.beta1);
    let _ = writeln!(out, "adam.beta2 = {:.16e}", a.beta2);
    let _ = writeln!(out, "adam.eps = {:.16e}", a.eps);
    push_array(&mut out, "net.params", trainer.net.params());
    push_array(&mut out, "adam.m", &a.m);
    push_array(&mut out, "adam.v", &a.v);
    out.push_str("[end]\n");
    out
}

pub fn save(path: &Path, config: &ExperimentConfig, trainer: &Trainer) -> Result<()> {
    // write then rename so an interrupted save never leaves half a file
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, to_text(config, trainer)).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn perr(msg: impl Into<String>) -> Error {
    Error::parse("checkpoint", msg)
}

struct Sections<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Sections<'a> {
    fn expect(&mut self, want: &str) -> Result<()> {
        match self.lines.next() {
            Some((_, l)) if l.trim() == want => Ok(()),
            Some((i, l)) => Err(perr(format!("line {}: expected {want:?}, got {l:?}", i + 1))),
            None => Err(perr(format!("unexpected end of file, expected {want:?}"))),
        }
    }

    /// Lines up to (not including) the next `[...]` header.
    fn body(&mut self) -> Vec<&'a str> {
        let mut out = Vec::new();
        while let Some((_, l)) = self.lines.peek() {
            if l.starts_with('[') {
                break;
            }
            out.push(*l);
            self.lines.next();
        }
        out
    }

    fn array(&mut self, name: &str) -> Result<Vec<f64>> {
        let (i, header) = self.lines.next().ok_or_else(|| perr(format!("missing array {name}")))?;
        let inner = header
            .trim()
            .strip_prefix("[array ")
            .and_then(|h| h.strip_suffix(']'))
            .ok_or_else(|| perr(format!("line {}: expected array header, got {header:?}", i + 1)))?;
        let (got_name, n) = inner
            .split_once(' ')
            .ok_or_else(|| perr(format!("line {}: malformed array header", i + 1)))?;
        if got_name != name {
            return Err(perr(format!("line {}: expected array {name}, got {got_name}", i + 1)));
        }
        let n: usize = n.parse().map_err(|_| perr(format!("line {}: bad array length {n:?}", i + 1)))?;
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            let (j, l) = self.lines.next().ok_or_else(|| perr(format!("array {name} truncated")))?;
            values.push(
                l.trim()
                    .parse::<f64>()
                    .map_err(|_| perr(format!("line {}: bad number {l:?}", j + 1)))?,
            );
        }
        Ok(values)
    }
}

fn state_value<T: std::str::FromStr>(lines: &[&str], key: &str) -> Result<T> {
    let v = lines
        .iter()
        .filter_map(|l| l.split_once('='))
        .find(|(k, _)| k.trim() == key)
        .map(|(_, v)| v.trim())
        .ok_or_else(|| perr(format!("missing state key {key}")))?;
    v.parse().map_err(|_| perr(format!("bad value for {key}: {v:?}")))
}

/// Restore the config and a trainer positioned exactly where it was saved.
pub fn from_text(text: &str) -> Result<(ExperimentConfig, Trainer)> {
    let mut s = Sections {
        lines: text.lines().enumerate().peekable(),
    };
    let (_, first) = s.lines.next().ok_or_else(|| perr("empty file"))?;
    let version = first
        .strip_prefix(FORMAT_HEADER)
        .map(str::trim)
        .ok_or_else(|| perr(format!("not a checkpoint (first line {first:?})")))?;
    if version != FORMAT_VERSION.to_string() {
        return Err(perr(format!("unsupported format version {version}")));
    }
    s.expect("[config]")?;
    let config = ExperimentConfig::parse(&s.body().join("\n"))?;
    s.expect("[state]")?;
    let state = s.body();
    let params = s.array("net.params")?;
    let m = s.array("adam.m")?;
    let v = s.array("adam.v")?;
    s.expect("[end]")?;

    let net = GeneratorNet::from_parts(config.net.embed_dim, config.net.time_scale, &config.net.hidden, params)?;
    if m.len() != net.num_params() || v.len() != net.num_params() {
        return Err(perr("adam moment arrays do not match the network size"));
    }
    let adam = AdamState {
        lr: state_value(&state, "adam.lr")?,
        beta1: state_value(&state, "adam.beta1")?,
        beta2: state_value(&state, "adam.beta2")?,
        eps: state_value(&state, "adam.eps")?,
        step: state_value(&state, "adam.step")?,
        m,
        v,
    };
    let stream = RngStream::from_state(StreamState {
        seed: state_value(&state, "rng.seed")?,
        stream: state_value(&state, "rng.stream")?,
        word_pos: state_value(&state, "rng.word_pos")?,
    });
    let mut trainer = Trainer::new(config.diffusion, config.train.clone(), config.net.clone(), config.data.load()?)?;
    trainer.net = net;
    trainer.adam = adam;
    trainer.stream = stream;
    trainer.iteration = state_value(&state, "iteration")?;
    Ok((config, trainer))
}

pub fn load(path: &Path) -> Result<(ExperimentConfig, Trainer)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_text(&text).map_err(|e| match e {
        Error::Parse { what, msg } => Error::Parse {
            what: format!("{what} {}", path.display()),
            msg,
        },
        e => e,
    })
}
