//! Score a perturbed sample of the mixture dataset against the truth.

use betadiff::data::Dataset;
use betadiff::eval::{evaluate, pmf_100, Pmf100};
use betadiff::random::RngStream;

fn main() -> betadiff::Result<()> {
    let data = Dataset::MixtureE1;
    let mut rng = RngStream::new(3, 0);
    let exact = data.sample(&mut rng, 50_000);
    let truth = Pmf100::of_dataset(&data);

    for jitter in [0.0, 0.005, 0.02, 0.05] {
        let noisy: Vec<f64> = exact
            .iter()
            .map(|&x| (x + jitter * rng.normal()).clamp(0.0, 1.0))
            .collect();
        let ev = evaluate(&noisy, &data, &mut RngStream::new(4, 0))?;
        let pmf = pmf_100(&noisy)?;
        let peak = pmf.masses().iter().cloned().fold(0.0, f64::max);
        println!(
            "jitter {jitter:<6} w1={:.5} jsd={:.5} hellinger={:.5} peak bin={peak:.4} (truth peak {:.4})",
            ev.w1,
            ev.jsd,
            ev.hellinger,
            truth.masses().iter().cloned().fold(0.0, f64::max)
        );
    }
    Ok(())
}
