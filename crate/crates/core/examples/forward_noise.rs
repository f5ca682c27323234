//! Push a few data values through the forward beta diffusion and watch them
//! drift toward zero.
//!
//! ```text
//! cargo run --release --example forward_noise
//! ```

use betadiff::chain::forward_marginal_params;
use betadiff::random::{sample_beta_logit, RngStream};
use betadiff::{sigmoid, DiffusionConfig};

fn main() -> betadiff::Result<()> {
    let cfg = DiffusionConfig::default();
    let mut rng = RngStream::new(0, 0);
    let x0s = [0.1, 0.5, 0.9];
    println!("{:>5}  {:>24}  {:>24}  {:>24}", "t", "x0=0.1", "x0=0.5", "x0=0.9");
    for k in 0..=10 {
        let t = (k as f64 / 10.0).max(1e-5);
        let cells: Vec<String> = x0s
            .iter()
            .map(|&x0| {
                let p = forward_marginal_params(&cfg, x0, t).unwrap();
                let z = sigmoid(sample_beta_logit(&mut rng, p).unwrap());
                // the rescaled value z / α_t is what stays comparable to x0
                format!("z={z:.3e} mean={:.3e}", p.mean())
            })
            .collect();
        println!("{t:>5.2}  {}", cells.join("  "));
    }
    Ok(())
}
