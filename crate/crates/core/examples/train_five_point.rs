//! Train the beta model on the five-atom dataset and report the final
//! distances to the truth.
//!
//! ```text
//! cargo run --release --example train_five_point -- [iterations] [klub|neg_elbo]
//! ```

use betadiff::data::Dataset;
use betadiff::eval::atom_report;
use betadiff::net::{InputKind, NetConfig};
use betadiff::sampler::SamplerConfig;
use betadiff::trainer::{TrainConfig, TrainEvent, Trainer};
use betadiff::DiffusionConfig;

fn main() -> betadiff::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let iterations: u64 = args.next().map(|s| s.parse().expect("iterations")).unwrap_or(5000);
    let variant = args.next().unwrap_or_else(|| "klub".into()).parse()?;

    let train = TrainConfig {
        iterations,
        eval_every: iterations,
        eval_samples: 20_000,
        log_every: 500,
        variant,
        ..TrainConfig::default()
    };
    let net = NetConfig {
        input: InputKind::Precond,
        ..NetConfig::default()
    };
    let mut trainer = Trainer::new(DiffusionConfig::default(), train, net, Dataset::FivePoint)?;
    let started = std::time::Instant::now();
    let rows = trainer.run(SamplerConfig::default(), |_, ev| {
        if let TrainEvent::Eval { run, .. } = ev {
            let atoms = Dataset::FivePoint.atoms().unwrap();
            let report = atom_report(&run.values, atoms, 0.01);
            println!("within ±0.01 of an atom: {:.3}", report.within);
            println!("mass nearest each atom: {:.3?}", report.nearest_mass);
        }
        Ok(())
    })?;
    let last = rows.last().unwrap();
    println!(
        "{} iterations in {:.1?}: w1={:.4} jsd={:.4} hellinger={:.4}",
        iterations,
        started.elapsed(),
        last.w1,
        last.jsd,
        last.hellinger
    );
    Ok(())
}
