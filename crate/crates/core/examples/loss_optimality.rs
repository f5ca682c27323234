//! KLUB is minimized at the conditional mean of `x0`; the negative ELBO is
//! not. Scans both losses over a three-atom distribution at a few times.

use betadiff::loss::{posterior_mean_optimality_check, KlubGeometry, LossVariant};
use betadiff::DiffusionConfig;

fn main() -> betadiff::Result<()> {
    let cfg = DiffusionConfig::default();
    let atoms = [(0.2, 0.5), (0.5, 0.3), (0.9, 0.2)];
    println!("{:>5} {:>9} {:>12} {:>12} {:>12} {:>12}", "t", "mean", "klub cond", "klub marg", "elbo cond", "elbo marg");
    for t in [0.05, 0.3, 0.6, 0.9] {
        let geo = KlubGeometry::at_time(&cfg, t)?;
        let k = posterior_mean_optimality_check(&atoms, &geo, LossVariant::Klub)?;
        let e = posterior_mean_optimality_check(&atoms, &geo, LossVariant::NegElbo)?;
        println!(
            "{t:>5.2} {:>9.6} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
            k.mixture_mean, k.conditional_argmin, k.marginal_argmin, e.conditional_argmin, e.marginal_argmin
        );
    }
    Ok(())
}
