//! Reverse sampling with a fixed predictor, then with a freshly trained
//! network, printing one chain's trajectory.
//!
//! ```text
//! cargo run --release --example reverse_sampling -- [iterations]
//! ```

use betadiff::data::Dataset;
use betadiff::eval::atom_report;
use betadiff::net::{InputEncoder, InputKind, NetConfig};
use betadiff::random::RngStream;
use betadiff::sampler::{BetaSampler, ConstantDenoiser, SamplerConfig};
use betadiff::trainer::{TrainConfig, Trainer};
use betadiff::DiffusionConfig;

fn main() -> betadiff::Result<()> {
    let iterations: u64 = std::env::args().nth(1).map(|s| s.parse().expect("iterations")).unwrap_or(2000);
    let cfg = DiffusionConfig::default();

    // A predictor that always says 0.3 makes every chain end near 0.3.
    let encoder = InputEncoder {
        kind: InputKind::Raw,
        eta: cfg.eta,
        schedule: cfg.schedule,
        x_min: 0.0,
        x_max: 1.0,
    };
    let den = ConstantDenoiser(0.3);
    let scfg = SamplerConfig {
        return_mode: betadiff::sampler::ReturnMode::ZRescaled,
        ..SamplerConfig::default()
    };
    let run = BetaSampler::new(&den, &cfg, encoder, 0.3, scfg)?.sample_many(5000, &RngStream::new(1, 0))?;
    let mean = run.values.iter().sum::<f64>() / run.values.len() as f64;
    println!("constant predictor: mean of final latents {mean:.4}");

    let train = TrainConfig {
        iterations,
        eval_every: iterations,
        eval_samples: 1,
        log_every: iterations,
        ..TrainConfig::default()
    };
    let net = NetConfig {
        input: InputKind::Precond,
        ..NetConfig::default()
    };
    let mut trainer = Trainer::new(cfg, train, net, Dataset::FivePoint)?;
    while trainer.iteration < iterations {
        trainer.step()?;
    }
    let scfg = SamplerConfig {
        nfe: 50,
        capture_trajectory: true,
        ..SamplerConfig::default()
    };
    let run = trainer.sample(2000, scfg, &RngStream::new(2, 0))?;
    println!("\nchain 0 after {iterations} iterations:");
    println!("{:>4} {:>8} {:>8} {:>8}", "j", "t", "z_viz", "x_hat");
    for p in run.trajectories.iter().filter(|p| p.chain == 0 && p.j % 5 == 0) {
        println!("{:>4} {:>8.4} {:>8.4} {:>8.4}", p.j, p.t, p.z_viz, p.x_hat);
    }
    let report = atom_report(&run.values, Dataset::FivePoint.atoms().unwrap(), 0.01);
    println!("\nwithin ±0.01 of an atom: {:.3}", report.within);
    println!("mass nearest each atom: {:.3?}", report.nearest_mass);
    Ok(())
}
