//! The special functions behind the beta KL divergence.

use betadiff::loss::kl_beta;
use betadiff::random::BetaParams;
use betadiff::specfn::{digamma, ln_beta, ln_gamma, trigamma};

fn main() -> betadiff::Result<()> {
    println!("{:>10} {:>22} {:>22} {:>22}", "x", "ln_gamma", "digamma", "trigamma");
    for x in [1e-8, 0.5, 1.0, 3.7, 50.0, 1e6] {
        println!("{x:>10.1e} {:>22.15e} {:>22.15e} {:>22.15e}", ln_gamma(x)?, digamma(x)?, trigamma(x)?);
    }
    println!("\nln B(1e4, 2e4) = {:.15e}", ln_beta(1e4, 2e4)?);

    let p = BetaParams::new(2.0, 5.0)?;
    for (a, b) in [(2.0, 5.0), (2.5, 5.0), (20.0, 50.0), (0.5, 0.5)] {
        let q = BetaParams::new(a, b)?;
        println!("KL(Beta(2,5) || Beta({a},{b})) = {:.6e}", kl_beta(p, q)?);
    }
    Ok(())
}
