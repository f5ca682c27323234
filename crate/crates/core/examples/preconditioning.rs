//! Closed-form mean and spread of `logit(z_t)` against Monte Carlo.

use betadiff::chain::marginal_params;
use betadiff::net::precond_stats;
use betadiff::random::{sample_beta_logit, RngStream};
use betadiff::stats::Moments;
use betadiff::Schedule;

fn main() -> betadiff::Result<()> {
    let sched = Schedule::default();
    // the five-point data range
    let (eta, x_min, x_max) = (1e4, 1.0 / 7.0, 5.0 / 7.0);
    let mut rng = RngStream::new(6, 0);
    println!("{:>5} {:>11} {:>11} {:>11} {:>11}", "t", "mean", "mc mean", "std", "mc std");
    for t in [0.01, 0.2, 0.5, 0.8, 1.0] {
        let alpha = sched.alpha(t)?;
        let stats = precond_stats(eta, alpha, x_min, x_max)?;
        let mut m = Moments::default();
        for _ in 0..200_000 {
            let x0 = rng.uniform(x_min, x_max);
            m.push(sample_beta_logit(&mut rng, marginal_params(eta, alpha, x0)?)?);
        }
        println!(
            "{t:>5.2} {:>11.5} {:>11.5} {:>11.5} {:>11.5}",
            stats.mean_logit,
            m.mean(),
            stats.std_logit,
            m.std_dev()
        );
    }
    Ok(())
}
