//! Distances between generated samples and the true data distribution:
//! sorted-sample Wasserstein-1 and JSD / Hellinger on 100-bin PMFs.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::random::RngStream;

pub const PMF_BINS: usize = 100;

/// Number of generated samples compared against a discrete truth.
pub const DISCRETE_W1_SAMPLES: usize = 10_000;

/// Masses over 100 equal-width bins on `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Pmf100 {
    masses: Vec<f64>,
}

impl Pmf100 {
    /// Validates shape, non-negativity and normalization (1e-12).
    pub fn from_masses(masses: Vec<f64>) -> Result<Self> {
        if masses.len() != PMF_BINS {
            return Err(Error::Argument(format!("expected {PMF_BINS} bins, got {}", masses.len())));
        }
        if masses.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::Argument("bin masses must be finite and non-negative".into()));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Argument(format!("bin masses sum to {total}")));
        }
        Ok(Self { masses })
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Exact bin masses of a dataset.
    pub fn of_dataset(data: &Dataset) -> Self {
        let masses = (0..PMF_BINS)
            .map(|i| data.interval_mass(i as f64 / PMF_BINS as f64, (i + 1) as f64 / PMF_BINS as f64))
            .collect();
        Self { masses }
    }
}

/// Bin index of a value in `[0, 1]`; 1.0 falls in the last bin.
pub fn bin_index(x: f64) -> usize {
    ((x * PMF_BINS as f64) as usize).min(PMF_BINS - 1)
}

/// Normalized histogram; errors on values outside `[0, 1]`.
pub fn pmf_100(samples: &[f64]) -> Result<Pmf100> {
    if samples.is_empty() {
        return Err(Error::Data("cannot bin an empty sample".into()));
    }
    if let Some(x) = samples.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::Data(format!("sample {x} outside [0, 1]")));
    }
    let mut counts = vec![0u64; PMF_BINS];
    for &x in samples {
        counts[bin_index(x)] += 1;
    }
    let n = samples.len() as f64;
    Ok(Pmf100 {
        masses: counts.into_iter().map(|c| c as f64 / n).collect(),
    })
}

/// Clamp to `[0, 1]` first, returning the histogram and how many values
/// were moved. Non-finite samples are rejected.
pub fn pmf_100_clamped(samples: &[f64]) -> Result<(Pmf100, usize)> {
    if let Some(x) = samples.iter().find(|x| !x.is_finite()) {
        return Err(Error::Data(format!("non-finite sample {x}")));
    }
    let clamped = samples.iter().filter(|x| !(0.0..=1.0).contains(*x)).count();
    let v: Vec<f64> = samples.iter().map(|x| x.clamp(0.0, 1.0)).collect();
    Ok((pmf_100(&v)?, clamped))
}

/// Jensen–Shannon divergence in nats.
pub fn jsd(p: &Pmf100, q: &Pmf100) -> f64 {
    let half_kl = |a: f64, m: f64| if a > 0.0 { 0.5 * a * (a / m).ln() } else { 0.0 };
    p.masses
        .iter()
        .zip(&q.masses)
        .map(|(&a, &b)| {
            let m = 0.5 * (a + b);
            // sum the two terms in a fixed order so jsd(p,q) == jsd(q,p)
            let (x, y) = if a <= b { (a, b) } else { (b, a) };
            half_kl(x, m) + half_kl(y, m)
        })
        .sum::<f64>()
        .max(0.0)
}

/// `sqrt(½ Σ (√p - √q)²)`.
pub fn hellinger(p: &Pmf100, q: &Pmf100) -> f64 {
    let s: f64 = p
        .masses
        .iter()
        .zip(&q.masses)
        .map(|(&a, &b)| (a.sqrt() - b.sqrt()).powi(2))
        .sum();
    (0.5 * s).sqrt()
}

/// Mean absolute difference of two equally sized sorted samples.
pub fn wasserstein1(sorted_a: &[f64], sorted_b: &[f64]) -> Result<f64> {
    if sorted_a.len() != sorted_b.len() {
        return Err(Error::Argument(format!(
            "wasserstein1 needs equal counts, got {} and {}",
            sorted_a.len(),
            sorted_b.len()
        )));
    }
    if sorted_a.is_empty() {
        return Err(Error::Argument("wasserstein1 of empty samples".into()));
    }
    let total: f64 = sorted_a.iter().zip(sorted_b).map(|(a, b)| (a - b).abs()).sum();
    Ok(total / sorted_a.len() as f64)
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// W1 between generated samples and the dataset.
///
/// For a discrete truth with `k` atoms the first `DISCRETE_W1_SAMPLES`
/// generated values (rounded down to a multiple of `k`) are compared with a
/// vector holding equal copies of each atom. Otherwise an equally sized
/// truth sample is drawn from `stream`.
pub fn w1_to_truth(generated: &[f64], data: &Dataset, stream: &mut RngStream) -> Result<f64> {
    match data.atoms() {
        Some(atoms) => {
            let k = atoms.len();
            let n = generated.len().min(DISCRETE_W1_SAMPLES) / k * k;
            if n == 0 {
                return Err(Error::Argument(format!("need at least {k} generated samples")));
            }
            let copies = n / k;
            let truth: Vec<f64> = atoms.iter().flat_map(|&a| std::iter::repeat_n(a, copies)).collect();
            wasserstein1(&sorted(&generated[..n]), &truth)
        }
        None => {
            let truth = sorted(&data.sample(stream, generated.len()));
            wasserstein1(&sorted(generated), &truth)
        }
    }
}

/// One row of `metrics.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub iteration: u64,
    pub model: String,
    pub w1: f64,
    pub jsd: f64,
    pub hellinger: f64,
    pub clamped_count: usize,
}

impl MetricsRow {
    pub const CSV_HEADER: &'static str = "iteration,model,w1,jsd,hellinger,clamped_count";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{:.10e},{:.10e},{:.10e},{}",
            self.iteration, self.model, self.w1, self.jsd, self.hellinger, self.clamped_count
        )
    }

    pub fn from_csv(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 6 {
            return Err(Error::parse("metrics row", format!("expected 6 fields: {line:?}")));
        }
        let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| Error::parse("metrics row", format!("bad number {s:?}"))) };
        let int = |s: &str| -> Result<u64> { s.parse().map_err(|_| Error::parse("metrics row", format!("bad integer {s:?}"))) };
        Ok(Self {
            iteration: int(f[0])?,
            model: f[1].to_string(),
            w1: num(f[2])?,
            jsd: num(f[3])?,
            hellinger: num(f[4])?,
            clamped_count: int(f[5])? as usize,
        })
    }
}

/// Full comparison of a generated sample against a dataset.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub w1: f64,
    pub jsd: f64,
    pub hellinger: f64,
    pub clamped_count: usize,
    pub generated_pmf: Pmf100,
    pub true_pmf: Pmf100,
}

impl Evaluation {
    pub fn row(&self, iteration: u64, model: &str) -> MetricsRow {
        MetricsRow {
            iteration,
            model: model.to_string(),
            w1: self.w1,
            jsd: self.jsd,
            hellinger: self.hellinger,
            clamped_count: self.clamped_count,
        }
    }
}

pub fn evaluate(generated: &[f64], data: &Dataset, stream: &mut RngStream) -> Result<Evaluation> {
    let (generated_pmf, clamped_count) = pmf_100_clamped(generated)?;
    let true_pmf = Pmf100::of_dataset(data);
    Ok(Evaluation {
        w1: w1_to_truth(generated, data, stream)?,
        jsd: jsd(&generated_pmf, &true_pmf),
        hellinger: hellinger(&generated_pmf, &true_pmf),
        clamped_count,
        generated_pmf,
        true_pmf,
    })
}

/// How generated samples distribute around a set of atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomReport {
    /// Fraction of samples within `radius` of some atom.
    pub within: f64,
    /// Fraction of samples nearest to each atom.
    pub nearest_mass: Vec<f64>,
}

pub fn atom_report(samples: &[f64], atoms: &[f64], radius: f64) -> AtomReport {
    let mut nearest = vec![0usize; atoms.len()];
    let mut within = 0usize;
    for &x in samples {
        let (k, d) = atoms
            .iter()
            .enumerate()
            .map(|(k, a)| (k, (x - a).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one atom");
        nearest[k] += 1;
        if d <= radius {
            within += 1;
        }
    }
    let n = samples.len() as f64;
    AtomReport {
        within: within as f64 / n,
        nearest_mass: nearest.into_iter().map(|c| c as f64 / n).collect(),
    }
}
