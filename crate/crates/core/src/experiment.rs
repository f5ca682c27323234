//! Run directories, multi-run comparison tables with SVG plots, and the
//! forward-process visualization table.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::chain::{forward_marginal_params, viz_transform};
use crate::checkpoint;
use crate::config::ExperimentConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::{atom_report, Evaluation, MetricsRow, PMF_BINS};
use crate::random::{sample_beta_logit, RngStream};
use crate::sampler::SampleRun;
use crate::sigmoid;
use crate::trainer::{TrainEvent, Trainer};

pub const METRICS_FILE: &str = "metrics.csv";
pub const PMF_FILE: &str = "pmf.csv";
pub const SAMPLES_FILE: &str = "samples.txt";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const CHECKPOINT_FILE: &str = "checkpoint.txt";
pub const CONFIG_FILE: &str = "config.txt";
pub const LOSS_FILE: &str = "loss.csv";

/// Cap rayon's pool from `BETADIFF_THREADS`, if set. Call once, early.
pub fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("BETADIFF_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::config("BETADIFF_THREADS", format!("expected a positive integer, got {v:?}")))?;
        // a pool that already exists keeps its size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_all(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn io_at(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

/// What a finished run leaves behind.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub metrics: Vec<MetricsRow>,
    pub final_samples: Vec<f64>,
    pub final_evaluation: Evaluation,
}

/// Train `cfg` from scratch into `dir`, writing `config.txt`, `loss.csv`,
/// `metrics.csv`, `checkpoint.txt`, and at the end `samples.txt`,
/// `pmf.csv` and `summary.txt`.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    let trainer = Trainer::new(cfg.diffusion, cfg.train.clone(), cfg.net.clone(), cfg.data.load()?)?;
    run_from(cfg, trainer, dir)
}

/// Continue training a restored trainer into `dir`, optionally raising the
/// total iteration count so a finished run can be extended.
pub fn resume_experiment(checkpoint_path: &Path, dir: &Path, iterations: Option<u64>) -> Result<RunSummary> {
    let (mut cfg, mut trainer) = checkpoint::load(checkpoint_path)?;
    if let Some(n) = iterations {
        if n < trainer.iteration {
            return Err(Error::config(
                "train.iterations",
                format!("checkpoint is already at iteration {}, cannot stop at {n}", trainer.iteration),
            ));
        }
        cfg.train.iterations = n;
        trainer.train.iterations = n;
    }
    run_from(&cfg, trainer, dir)
}

fn run_from(cfg: &ExperimentConfig, mut trainer: Trainer, dir: &Path) -> Result<RunSummary> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_all(&dir.join(CONFIG_FILE), &cfg.to_text())?;
    let fresh = trainer.iteration == 0;
    let loss_path = dir.join(LOSS_FILE);
    let metrics_path = dir.join(METRICS_FILE);
    let open = |p: &Path, header: &str| -> Result<BufWriter<File>> {
        if fresh || !p.exists() {
            let mut w = create(p)?;
            writeln!(w, "{header}").map_err(io_at(p))?;
            Ok(w)
        } else {
            let f = std::fs::OpenOptions::new().append(true).open(p).map_err(io_at(p))?;
            Ok(BufWriter::new(f))
        }
    };
    let mut loss_out = open(&loss_path, "iteration,loss,klub_cond,klub_marg,grad_norm")?;
    let mut metrics_out = open(&metrics_path, MetricsRow::CSV_HEADER)?;
    let ckpt_path = dir.join(CHECKPOINT_FILE);
    let mut last: Option<(Vec<f64>, Evaluation)> = None;
    let started = std::time::Instant::now();

    let rows = trainer.run(cfg.sampler, |tr, event| {
        match event {
            TrainEvent::Step(s) => {
                let opt = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:.10e}"));
                writeln!(
                    loss_out,
                    "{},{:.10e},{},{},{:.6e}",
                    s.iteration,
                    s.loss,
                    opt(s.klub_cond),
                    opt(s.klub_marg),
                    s.grad_norm
                )
                .map_err(io_at(&loss_path))?;
            }
            TrainEvent::Eval { run, evaluation, row } => {
                writeln!(metrics_out, "{}", row.to_csv()).map_err(io_at(&metrics_path))?;
                metrics_out.flush().map_err(io_at(&metrics_path))?;
                loss_out.flush().map_err(io_at(&loss_path))?;
                checkpoint::save(&ckpt_path, cfg, tr)?;
                last = Some((run.values.clone(), evaluation.clone()));
            }
        }
        Ok(())
    })?;
    loss_out.flush().map_err(io_at(&loss_path))?;

    let (samples, ev) = last.ok_or_else(|| Error::Argument("training finished without an evaluation".into()))?;
    write_samples(&dir.join(SAMPLES_FILE), &samples)?;
    write_pmf(&dir.join(PMF_FILE), &ev)?;
    let data = &trainer.data;
    let mut summary = String::new();
    let _ = writeln!(summary, "name: {}", cfg.name);
    let _ = writeln!(summary, "model: {}", cfg.train.model_label());
    let _ = writeln!(summary, "data: {}", data.name());
    let _ = writeln!(summary, "iterations: {}", trainer.iteration);
    let _ = writeln!(summary, "samples: {}", samples.len());
    let _ = writeln!(summary, "w1: {:.6e}", ev.w1);
    let _ = writeln!(summary, "jsd: {:.6e}", ev.jsd);
    let _ = writeln!(summary, "hellinger: {:.6e}", ev.hellinger);
    let _ = writeln!(summary, "clamped_count: {}", ev.clamped_count);
    if let Some(atoms) = data.atoms() {
        let rep = atom_report(&samples, atoms, 0.01);
        let _ = writeln!(summary, "within_0.01_of_atom: {:.6}", rep.within);
        let masses: Vec<String> = rep.nearest_mass.iter().map(|m| format!("{m:.6}")).collect();
        let _ = writeln!(summary, "nearest_atom_mass: {}", masses.join(","));
    }
    let _ = writeln!(summary, "elapsed_seconds: {:.1}", started.elapsed().as_secs_f64());
    write_all(&dir.join(SUMMARY_FILE), &summary)?;
    Ok(RunSummary {
        dir: dir.to_path_buf(),
        metrics: rows,
        final_samples: samples,
        final_evaluation: ev,
    })
}

pub fn write_samples(path: &Path, values: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    for v in values {
        writeln!(w, "{v:?}").map_err(io_at(path))?;
    }
    w.flush().map_err(io_at(path))
}

pub fn read_samples(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(io_at(path))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| l.parse::<f64>().map_err(|_| Error::parse(path.display().to_string(), format!("bad sample {l:?}"))))
        .collect()
}

fn write_pmf(path: &Path, ev: &Evaluation) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "bin,lo,hi,generated,truth").map_err(io_at(path))?;
    for (i, (g, t)) in ev.generated_pmf.masses().iter().zip(ev.true_pmf.masses()).enumerate() {
        let lo = i as f64 / PMF_BINS as f64;
        let hi = (i + 1) as f64 / PMF_BINS as f64;
        writeln!(w, "{i},{lo:.2},{hi:.2},{g:.8e},{t:.8e}").map_err(io_at(path))?;
    }
    w.flush().map_err(io_at(path))
}

pub fn write_trajectories(path: &Path, run: &SampleRun) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{}", crate::sampler::TrajectoryPoint::CSV_HEADER).map_err(io_at(path))?;
    for p in &run.trajectories {
        writeln!(w, "{}", p.to_csv()).map_err(io_at(path))?;
    }
    w.flush().map_err(io_at(path))
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = std::fs::read_to_string(path).map_err(io_at(path))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == MetricsRow::CSV_HEADER => {}
        _ => return Err(Error::parse(path.display().to_string(), "missing metrics header")),
    }
    lines.filter(|l| !l.trim().is_empty()).map(MetricsRow::from_csv).collect()
}

/// Metrics of several runs aligned by iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub labels: Vec<String>,
    pub iterations: Vec<u64>,
    /// `rows[k][r]` is run `r`'s metrics at `iterations[k]`.
    pub rows: Vec<Vec<MetricsRow>>,
}

pub const COMPARED_METRICS: [&str; 3] = ["w1", "jsd", "hellinger"];

fn metric(row: &MetricsRow, name: &str) -> f64 {
    match name {
        "w1" => row.w1,
        "jsd" => row.jsd,
        _ => row.hellinger,
    }
}

impl Comparison {
    /// Requires every run to have been evaluated at the same iterations.
    pub fn from_runs(runs: &[(String, Vec<MetricsRow>)]) -> Result<Self> {
        if runs.len() < 2 {
            return Err(Error::Argument("compare needs at least two runs".into()));
        }
        let grid = |rows: &[MetricsRow]| rows.iter().map(|r| r.iteration).collect::<Vec<_>>();
        let iterations = grid(&runs[0].1);
        for (label, rows) in &runs[1..] {
            let g = grid(rows);
            if g != iterations {
                return Err(Error::Data(format!(
                    "evaluation iterations differ: {} has {:?}, {} has {:?}",
                    runs[0].0, iterations, label, g
                )));
            }
        }
        let rows = (0..iterations.len())
            .map(|k| runs.iter().map(|(_, r)| r[k].clone()).collect())
            .collect();
        Ok(Self {
            labels: runs.iter().map(|(l, _)| l.clone()).collect(),
            iterations,
            rows,
        })
    }

    /// Wide CSV: `iteration`, then `<label>.<metric>` per run, then the
    /// difference of each later run from the first.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration");
        for l in &self.labels {
            for m in COMPARED_METRICS {
                let _ = write!(out, ",{l}.{m}");
            }
        }
        for l in &self.labels[1..] {
            for m in COMPARED_METRICS {
                let _ = write!(out, ",{l}-{}.{m}", self.labels[0]);
            }
        }
        out.push('\n');
        for (it, row) in self.iterations.iter().zip(&self.rows) {
            let _ = write!(out, "{it}");
            for r in row {
                for m in COMPARED_METRICS {
                    let _ = write!(out, ",{:.10e}", metric(r, m));
                }
            }
            for r in &row[1..] {
                for m in COMPARED_METRICS {
                    let _ = write!(out, ",{:.10e}", metric(r, m) - metric(&row[0], m));
                }
            }
            out.push('\n');
        }
        out
    }

    /// Line plot of one metric against iteration, one polyline per run.
    pub fn to_svg(&self, metric_name: &str) -> String {
        let (w, h) = (640.0, 400.0);
        let (left, right, top, bottom) = (70.0, 160.0, 30.0, 50.0);
        let (pw, ph) = (w - left - right, h - top - bottom);
        let xs: Vec<f64> = self.iterations.iter().map(|&i| i as f64).collect();
        let (x_lo, x_hi) = (xs[0].min(0.0), xs[xs.len() - 1].max(1.0));
        let values: Vec<f64> = self.rows.iter().flatten().map(|r| metric(r, metric_name)).collect();
        let y_hi = values.iter().cloned().fold(0.0, f64::max).max(1e-12) * 1.05;
        let px = |x: f64| left + pw * (x - x_lo) / (x_hi - x_lo).max(1e-300);
        let py = |y: f64| top + ph * (1.0 - y / y_hi);
        const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
        );
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="18" font-family="sans-serif" font-size="14" text-anchor="middle">{} vs iteration</text>"#,
            left + pw / 2.0,
            xml_escape(metric_name)
        );
        // axes
        let _ = writeln!(
            s,
            r#"<path d="M{left} {top} L{left} {y0} L{x1} {y0}" stroke="black" fill="none"/>"#,
            y0 = top + ph,
            x1 = left + pw
        );
        for k in 0..=4 {
            let y = y_hi * k as f64 / 4.0;
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{:.3}</text>"#,
                left - 6.0,
                py(y) + 4.0,
                y
            );
        }
        for x in [x_lo, 0.5 * (x_lo + x_hi), x_hi] {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{:.0}</text>"#,
                px(x),
                top + ph + 18.0,
                x
            );
        }
        for (r, label) in self.labels.iter().enumerate() {
            let color = COLORS[r % COLORS.len()];
            let pts: Vec<String> = xs
                .iter()
                .zip(&self.rows)
                .map(|(&x, row)| format!("{:.2},{:.2}", px(x), py(metric(&row[r], metric_name))))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                pts.join(" ")
            );
            let ly = top + 16.0 * r as f64 + 10.0;
            let _ = writeln!(
                s,
                r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
                w - right + 10.0,
                w - right + 30.0
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
                w - right + 35.0,
                ly + 4.0,
                xml_escape(label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Read `metrics.csv` from each run directory and write `comparison.csv`
/// plus `<metric>.svg` into `out_dir`.
pub fn compare(run_dirs: &[PathBuf], out_dir: &Path) -> Result<Comparison> {
    let mut runs = Vec::new();
    for (i, d) in run_dirs.iter().enumerate() {
        let base = d.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| format!("run{i}"));
        let label = if runs.iter().any(|(l, _): &(String, _)| *l == base) { format!("{base}_{i}") } else { base };
        runs.push((label, read_metrics(&d.join(METRICS_FILE))?));
    }
    let cmp = Comparison::from_runs(&runs)?;
    std::fs::create_dir_all(out_dir).map_err(io_at(out_dir))?;
    write_all(&out_dir.join("comparison.csv"), &cmp.to_csv())?;
    for m in COMPARED_METRICS {
        write_all(&out_dir.join(format!("{m}.svg")), &cmp.to_svg(m))?;
    }
    Ok(cmp)
}

/// One forward draw shown through the display transform.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VizRow {
    pub x_raw: f64,
    pub t: f64,
    pub z: f64,
    pub z_viz: f64,
}

/// `t = 0, 0.05, ..., 1`.
pub fn viz_times() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

/// For each raw value and time, draw `z_t` from the forward marginal and
/// rescale it for display.
pub fn forward_viz(cfg: &ExperimentConfig, x_raw: &[f64], times: &[f64], stream: &mut RngStream) -> Result<Vec<VizRow>> {
    let d = &cfg.diffusion;
    let mut rows = Vec::with_capacity(x_raw.len() * times.len());
    for &x in x_raw {
        let x0 = crate::data::preprocess(x, d)?;
        for &t in times {
            let p = forward_marginal_params(d, x0, t)?;
            let logit_z = sample_beta_logit(stream, p)?;
            rows.push(VizRow {
                x_raw: x,
                t,
                z: sigmoid(logit_z),
                z_viz: viz_transform(d, logit_z, d.schedule.alpha(t)?),
            });
        }
    }
    Ok(rows)
}

pub fn viz_csv(rows: &[VizRow]) -> String {
    let mut out = String::from("x0,t,z,z_viz\n");
    for r in rows {
        let _ = writeln!(out, "{:?},{:.2},{:.10e},{:.10e}", r.x_raw, r.t, r.z, r.z_viz);
    }
    out
}

/// Score an existing sample against a dataset.
pub fn evaluate_samples(values: &[f64], data: &Dataset, seed: u64) -> Result<Evaluation> {
    crate::eval::evaluate(values, data, &mut RngStream::new(seed, crate::random::streams::TRUTH))
}
