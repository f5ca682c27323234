//! Train the Gaussian diffusion baseline on the mixture dataset and score
//! both of its return modes.
//!
//! ```text
//! cargo run --release --example gauss_baseline -- [iterations]
//! ```

use betadiff::data::Dataset;
use betadiff::eval::evaluate;
use betadiff::net::NetConfig;
use betadiff::random::RngStream;
use betadiff::sampler::{ReturnMode, SamplerConfig};
use betadiff::trainer::{ModelKind, TrainConfig, Trainer};
use betadiff::DiffusionConfig;

fn main() -> betadiff::Result<()> {
    let iterations: u64 = std::env::args().nth(1).map(|s| s.parse().expect("iterations")).unwrap_or(2000);
    let train = TrainConfig {
        iterations,
        model: ModelKind::Gauss,
        log_every: 500,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(DiffusionConfig::default(), train, NetConfig::default(), Dataset::MixtureE1)?;
    while trainer.iteration < iterations {
        let s = trainer.step()?;
        if s.iteration % 500 == 0 {
            println!("{}", s.log_line());
        }
    }
    for mode in [ReturnMode::XHat, ReturnMode::ZRescaled] {
        let scfg = SamplerConfig {
            return_mode: mode,
            ..SamplerConfig::default()
        };
        let run = trainer.sample(20_000, scfg, &RngStream::new(5, 0))?;
        let ev = evaluate(&run.values, &trainer.data, &mut RngStream::new(6, 0))?;
        println!("{mode}: w1={:.4} jsd={:.4} hellinger={:.4}", ev.w1, ev.jsd, ev.hellinger);
    }
    Ok(())
}
