use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use betadiff::checkpoint;
use betadiff::config::{self, DataSource, ExperimentConfig, PRESETS};
use betadiff::data::{DataKind, Dataset};
use betadiff::error::{Error, Result};
use betadiff::experiment::{self, read_samples, viz_csv, viz_times, write_samples, write_trajectories};
use betadiff::random::{streams, RngStream};
use betadiff::sampler::ReturnMode;

#[derive(Parser)]
#[command(name = "betadiff", version, about = "Beta diffusion on bounded scalar data")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Config file of `key = value` lines
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in preset name (see `preset --list`)
    #[arg(long)]
    preset: Option<String>,
}

impl Source {
    fn load(&self) -> Result<ExperimentConfig> {
        match (&self.config, &self.preset) {
            (Some(p), _) => ExperimentConfig::load(p),
            (_, Some(name)) => config::preset(name),
            _ => unreachable!("clap enforces one source"),
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a model and write a run directory
    Train {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        seed: Option<u64>,
        /// Override train.iterations
        #[arg(long)]
        iterations: Option<u64>,
        /// Run directory (default: runs/<name>)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Continue training from a checkpoint
    Resume {
        #[arg(long)]
        checkpoint: PathBuf,
        /// New total iteration count (default: the checkpoint's own)
        #[arg(long)]
        iterations: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate samples from a checkpoint, one per line
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        nfe: Option<usize>,
        /// Also write every chain's reverse trajectory here
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// xhat or z_rescaled
        #[arg(long)]
        return_mode: Option<ReturnMode>,
        /// Write samples here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a checkpoint or a sample file against its dataset
    Eval {
        #[arg(long, conflicts_with = "samples")]
        checkpoint: Option<PathBuf>,
        /// Newline-delimited samples
        #[arg(long, requires = "data")]
        samples: Option<PathBuf>,
        /// five_point, mixture_e1, or a path to a data file
        #[arg(long)]
        data: Option<String>,
        #[arg(long)]
        nfe: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Align the metrics of several runs and plot them
    Compare {
        #[arg(required = true, num_args = 2..)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Forward-noise a few values over t = 0, 0.05, ..., 1
    ForwardViz {
        #[command(flatten)]
        source: Source,
        /// Raw data values (default: the dataset atoms, or 0.2,0.5,0.8)
        #[arg(long, value_delimiter = ',')]
        x0: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List presets or print one as a config file
    Preset {
        #[arg(long)]
        list: bool,
        name: Option<String>,
    },
}

fn output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).ok();
            Ok(())
        }
    }
}

fn dataset_arg(s: &str) -> Result<Dataset> {
    match s.parse::<DataKind>() {
        Ok(kind) => Ok(Dataset::from_kind(kind)),
        Err(_) => DataSource::File(s.into()).load(),
    }
}

fn print_eval(ev: &betadiff::eval::Evaluation) {
    println!("w1 = {:.6e}", ev.w1);
    println!("jsd = {:.6e}", ev.jsd);
    println!("hellinger = {:.6e}", ev.hellinger);
    println!("clamped_count = {}", ev.clamped_count);
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Train { source, seed, iterations, out } => {
            let mut cfg = source.load()?;
            if let Some(s) = seed {
                cfg.train.seed = s;
            }
            if let Some(n) = iterations {
                cfg.train.iterations = n;
            }
            let dir = out.unwrap_or_else(|| PathBuf::from("runs").join(&cfg.name));
            let summary = experiment::run_experiment(&cfg, &dir)?;
            print_eval(&summary.final_evaluation);
            eprintln!("wrote {}", dir.display());
        }
        Cmd::Resume { checkpoint, iterations, out } => {
            let summary = experiment::resume_experiment(&checkpoint, &out, iterations)?;
            print_eval(&summary.final_evaluation);
        }
        Cmd::Sample { checkpoint, n, nfe, trajectory, seed, return_mode, out } => {
            let (cfg, trainer) = checkpoint::load(&checkpoint)?;
            let mut scfg = cfg.sampler;
            if let Some(j) = nfe {
                scfg.nfe = j;
            }
            if let Some(m) = return_mode {
                scfg.return_mode = m;
            }
            scfg.capture_trajectory = trajectory.is_some();
            let stream = RngStream::new(seed.unwrap_or(cfg.train.seed), streams::SAMPLE);
            let run = trainer.sample(n, scfg, &stream)?;
            if let Some(p) = &trajectory {
                write_trajectories(p, &run)?;
            }
            match &out {
                Some(p) => write_samples(p, &run.values)?,
                None => {
                    let text: String = run.values.iter().map(|v| format!("{v:?}\n")).collect();
                    output(None, &text)?;
                }
            }
        }
        Cmd::Eval { checkpoint, samples, data, nfe, n, seed } => {
            if let Some(path) = checkpoint {
                let (cfg, trainer) = checkpoint::load(&path)?;
                let mut scfg = cfg.sampler;
                if let Some(j) = nfe {
                    scfg.nfe = j;
                }
                let n = n.unwrap_or(cfg.train.eval_samples);
                let stream = RngStream::new(seed, streams::EVAL);
                let run = trainer.sample(n, scfg, &stream)?;
                let data = match &data {
                    Some(d) => dataset_arg(d)?,
                    None => trainer.data.clone(),
                };
                print_eval(&experiment::evaluate_samples(&run.values, &data, seed)?);
            } else if let Some(path) = samples {
                let values = read_samples(&path)?;
                let data = dataset_arg(data.as_deref().expect("clap requires --data"))?;
                print_eval(&experiment::evaluate_samples(&values, &data, seed)?);
            } else {
                return Err(Error::Argument("eval needs --checkpoint or --samples".into()));
            }
        }
        Cmd::Compare { runs, out } => {
            let cmp = experiment::compare(&runs, &out)?;
            output(None, &cmp.to_csv())?;
        }
        Cmd::ForwardViz { source, x0, seed, out } => {
            let cfg = source.load()?;
            let x0 = if !x0.is_empty() {
                x0
            } else {
                match cfg.data.load()?.atoms() {
                    Some(a) => a.to_vec(),
                    None => vec![0.2, 0.5, 0.8],
                }
            };
            let mut stream = RngStream::new(seed, streams::VIZ);
            let rows = experiment::forward_viz(&cfg, &x0, &viz_times(), &mut stream)?;
            output(out.as_deref(), &viz_csv(&rows))?;
        }
        Cmd::Preset { list, name } => match (list, name) {
            (_, Some(name)) => output(None, &config::preset(&name)?.to_text())?,
            (true, None) => {
                for p in &PRESETS {
                    println!("{:<20} {}", p.name, p.description);
                }
            }
            (false, None) => return Err(Error::Argument("use --list or give a preset name".into())),
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, rec| writeln!(buf, "{}", rec.args()))
        .init();
    let cli = Cli::parse();
    if let Err(e) = experiment::configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code() as u8);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
