//! Synthetic range-bounded datasets and raw-value preprocessing.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::chain::DiffusionConfig;
use crate::error::{Error, Result};
use crate::random::RngStream;

/// The five equally weighted atoms `k/7`, `k = 1..=5`.
pub const FIVE_POINT_ATOMS: [f64; 5] = [1.0 / 7.0, 2.0 / 7.0, 3.0 / 7.0, 4.0 / 7.0, 5.0 / 7.0];

/// Point masses of the second synthetic mixture.
pub const MIXTURE_E1_ATOMS: [f64; 2] = [0.5, 0.9];

/// Data source selector as written in config files.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataKind {
    FivePoint,
    MixtureE1,
}

impl DataKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DataKind::FivePoint => "five_point",
            DataKind::MixtureE1 => "mixture_e1",
        }
    }
}

impl fmt::Display for DataKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DataKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "five_point" => Ok(DataKind::FivePoint),
            "mixture_e1" => Ok(DataKind::MixtureE1),
            other => Err(Error::config("data.kind", format!("unknown dataset {other:?}"))),
        }
    }
}

/// A one-dimensional distribution on `[0, 1]` to train against.
#[derive(Clone, Debug, PartialEq)]
pub enum Dataset {
    /// Equal mixture of the five atoms in [`FIVE_POINT_ATOMS`].
    FivePoint,
    /// Equal mixture of `Unif(0.1, 0.2)`, `0.3 + 0.1 Beta(1, 5)`, a point
    /// mass at 0.5, `0.6 + 0.1 Beta(0.5, 0.5)` and a point mass at 0.9.
    MixtureE1,
    /// Values read from a file, resampled uniformly.
    Empirical(Vec<f64>),
}

impl Dataset {
    pub fn from_kind(kind: DataKind) -> Self {
        match kind {
            DataKind::FivePoint => Dataset::FivePoint,
            DataKind::MixtureE1 => Dataset::MixtureE1,
        }
    }

    /// Newline-delimited decimals in `[0, 1]`; blank lines and `#` comments
    /// are skipped.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_values(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
    }

    pub fn parse_values(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let v: f64 = line
                .parse()
                .map_err(|_| Error::Data(format!("line {}: not a number: {line:?}", lineno + 1)))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Data(format!("line {}: value {v} outside [0, 1]", lineno + 1)));
            }
            values.push(v);
        }
        if values.is_empty() {
            return Err(Error::Data("no data values".into()));
        }
        Ok(Dataset::Empirical(values))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Dataset::FivePoint => "five_point",
            Dataset::MixtureE1 => "mixture_e1",
            Dataset::Empirical(_) => "file",
        }
    }

    /// `E[x0]` in raw units.
    pub fn mean(&self) -> f64 {
        match self {
            Dataset::FivePoint => 3.0 / 7.0,
            Dataset::MixtureE1 => (0.15 + (0.3 + 0.1 / 6.0) + 0.5 + 0.65 + 0.9) / 5.0,
            Dataset::Empirical(v) => v.iter().sum::<f64>() / v.len() as f64,
        }
    }

    /// Smallest and largest value the distribution can produce.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Dataset::FivePoint => (FIVE_POINT_ATOMS[0], FIVE_POINT_ATOMS[4]),
            Dataset::MixtureE1 => (0.1, 0.9),
            Dataset::Empirical(v) => v
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x))),
        }
    }

    /// Atoms of a purely discrete distribution with equal weights.
    pub fn atoms(&self) -> Option<&'static [f64]> {
        match self {
            Dataset::FivePoint => Some(&FIVE_POINT_ATOMS),
            _ => None,
        }
    }

    pub fn sample_one(&self, stream: &mut RngStream) -> f64 {
        match self {
            Dataset::FivePoint => FIVE_POINT_ATOMS[stream.index(5)],
            Dataset::MixtureE1 => match stream.index(5) {
                0 => stream.uniform(0.1, 0.2),
                // inverse CDF of Beta(1, 5): 1 - (1 - u)^(1/5)
                1 => 0.3 + 0.1 * -(stream.uniform_open01().ln() / 5.0).exp_m1(),
                2 => 0.5,
                // inverse CDF of Beta(1/2, 1/2): sin²(πu/2)
                3 => 0.6 + 0.1 * (0.5 * PI * stream.uniform_open01()).sin().powi(2),
                _ => 0.9,
            },
            Dataset::Empirical(v) => v[stream.index(v.len())],
        }
    }

    pub fn sample(&self, stream: &mut RngStream, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.sample_one(stream)).collect()
    }

    /// Probability mass of `[lo, hi)` (closed on the right when `hi = 1`).
    pub fn interval_mass(&self, lo: f64, hi: f64) -> f64 {
        let in_bin = |x: f64| (lo <= x && x < hi) || (hi >= 1.0 && x == 1.0);
        match self {
            Dataset::FivePoint => FIVE_POINT_ATOMS.iter().filter(|&&a| in_bin(a)).count() as f64 / 5.0,
            Dataset::MixtureE1 => {
                let atoms = MIXTURE_E1_ATOMS.iter().filter(|&&a| in_bin(a)).count() as f64;
                let cdf_sum = |x: f64| mixture_e1_continuous_cdf(x);
                (atoms + cdf_sum(hi) - cdf_sum(lo)) / 5.0
            }
            Dataset::Empirical(v) => v.iter().filter(|&&x| in_bin(x)).count() as f64 / v.len() as f64,
        }
    }
}

/// Sum of the CDFs of the three continuous components of the second mixture.
fn mixture_e1_continuous_cdf(x: f64) -> f64 {
    let unit = |u: f64| u.clamp(0.0, 1.0);
    let u1 = unit((x - 0.1) / 0.1);
    let u2 = unit((x - 0.3) / 0.1);
    let u4 = unit((x - 0.6) / 0.1);
    u1 + (1.0 - (1.0 - u2).powi(5)) + 2.0 / PI * u4.sqrt().asin()
}

/// Map a raw value in `[0, 1]` into the diffusion's data range.
pub fn preprocess(x_raw: f64, cfg: &DiffusionConfig) -> Result<f64> {
    if !(0.0..=1.0).contains(&x_raw) {
        return Err(Error::Data(format!("raw value {x_raw} outside [0, 1]")));
    }
    Ok(cfg.preprocess(x_raw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::Moments;

    #[test]
    fn five_point_outputs_are_exact_atoms() {
        let mut s = RngStream::new(1, 1);
        for x in Dataset::FivePoint.sample(&mut s, 1000) {
            assert!(FIVE_POINT_ATOMS.iter().any(|a| a.to_bits() == x.to_bits()));
        }
        assert!((Dataset::FivePoint.mean() - 0.428_571_428_571_428_6).abs() < 1e-15);
    }

    #[test]
    fn five_point_frequencies() {
        let n = 1_000_000;
        let mut s = RngStream::new(2, 1);
        let mut counts = [0usize; 5];
        for x in Dataset::FivePoint.sample(&mut s, n) {
            counts[FIVE_POINT_ATOMS.iter().position(|&a| a == x).unwrap()] += 1;
        }
        let se = (0.2f64 * 0.8 / n as f64).sqrt();
        for c in counts {
            assert!((c as f64 / n as f64 - 0.2).abs() < 4.0 * se, "{counts:?}");
        }
    }

    #[test]
    fn mixture_support_and_components() {
        let mut s = RngStream::new(3, 1);
        let xs = Dataset::MixtureE1.sample(&mut s, 500_000);
        let mut comp2 = Moments::default();
        let mut bins = [0usize; 5];
        for &x in &xs {
            let k = if (0.1..=0.2).contains(&x) {
                0
            } else if (0.3..=0.4).contains(&x) {
                comp2.push(x);
                1
            } else if x == 0.5 {
                2
            } else if (0.6..=0.7).contains(&x) {
                3
            } else if x == 0.9 {
                4
            } else {
                panic!("{x} outside support");
            };
            bins[k] += 1;
        }
        let n = xs.len() as f64;
        let se = (0.2f64 * 0.8 / n).sqrt();
        for b in bins {
            assert!((b as f64 / n - 0.2).abs() < 4.0 * se, "{bins:?}");
        }
        assert!((comp2.mean() - (0.3 + 0.1 / 6.0)).abs() < 4.0 * comp2.standard_error());
        let all: Moments = xs.iter().copied().collect();
        assert!((all.mean() - Dataset::MixtureE1.mean()).abs() < 4.0 * all.standard_error());
    }

    #[test]
    fn interval_masses_sum_to_one() {
        for d in [Dataset::FivePoint, Dataset::MixtureE1] {
            let total: f64 = (0..100).map(|i| d.interval_mass(i as f64 / 100.0, (i + 1) as f64 / 100.0)).sum();
            assert!((total - 1.0).abs() < 1e-12, "{}", d.name());
        }
        assert!((Dataset::MixtureE1.interval_mass(0.1, 0.15) - 0.1).abs() < 1e-15);
        assert!((Dataset::MixtureE1.interval_mass(0.5, 0.51) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn preprocess_examples() {
        let toy = DiffusionConfig::default();
        assert_eq!(preprocess(0.5, &toy).unwrap(), 0.5);
        let img = DiffusionConfig::image_defaults();
        assert_eq!(preprocess(0.0, &img).unwrap(), 0.6);
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            assert!((img.postprocess(preprocess(x, &img).unwrap()) - x).abs() < 1e-15);
        }
        assert!(matches!(preprocess(1.5, &toy), Err(Error::Data(_))));
        assert!(preprocess(-0.1, &toy).is_err());
    }

    #[test]
    fn parse_file_values() {
        let d = Dataset::parse_values("# header\n0.25\n\n0.75 # trailing\n").unwrap();
        assert_eq!(d, Dataset::Empirical(vec![0.25, 0.75]));
        assert_eq!(d.mean(), 0.5);
        assert_eq!(d.support(), (0.25, 0.75));
        assert!(Dataset::parse_values("0.5\n1.2\n").is_err());
        assert!(Dataset::parse_values("abc").is_err());
        assert!(Dataset::parse_values("# nothing").is_err());
    }

    #[test]
    fn kind_round_trip() {
        for k in [DataKind::FivePoint, DataKind::MixtureE1] {
            assert_eq!(k.as_str().parse::<DataKind>().unwrap(), k);
        }
        assert!("images".parse::<DataKind>().is_err());
    }
}
