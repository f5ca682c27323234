//! Train two small runs into a scratch directory, extend one from its
//! checkpoint, and compare their metric curves.

use betadiff::config::preset;
use betadiff::experiment::{compare, resume_experiment, run_experiment, CHECKPOINT_FILE};

fn main() -> betadiff::Result<()> {
    let root = std::env::temp_dir().join("betadiff_run_and_compare");
    let mut dirs = Vec::new();
    for name in ["five_point_klub", "five_point_elbo"] {
        let mut cfg = preset(name)?;
        cfg.net.hidden = vec![64, 64];
        cfg.train.iterations = 1000;
        cfg.train.eval_every = 250;
        cfg.train.eval_samples = 5000;
        let dir = root.join(name);
        let summary = run_experiment(&cfg, &dir)?;
        println!("{name}: hellinger {:.4}", summary.final_evaluation.hellinger);
        dirs.push(dir);
    }
    // both runs continue to 1500 iterations from where they stopped
    for dir in &dirs {
        resume_experiment(&dir.join(CHECKPOINT_FILE), dir, Some(1500))?;
    }
    let cmp = compare(&dirs, &root.join("comparison"))?;
    print!("{}", cmp.to_csv());
    println!("plots in {}", root.join("comparison").display());
    Ok(())
}
