//! Percentile bootstrap for the mean of small per-hop samples.
//!
//! Deterministic: the resampling stream comes from a seeded ChaCha8
//! generator, so identical inputs and seed give identical intervals.

use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_CONFIDENCE: f64 = 0.99;
pub const DEFAULT_RESAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapResult {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence: f64,
    pub resamples: usize,
}

/// Linear-interpolation quantile of a sorted slice, p in [0, 1].
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile-method bootstrap CI for the sample mean.
pub fn bootstrap_mean_ci(
    samples: &[f64],
    confidence: f64,
    resamples: usize,
    seed: u64,
) -> Result<BootstrapResult> {
    if samples.len() < 2 {
        return Err(Error::Input(format!(
            "bootstrap needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::Input("bootstrap samples must be finite".into()));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Domain { what: "confidence", value: confidence, min: 0.0, max: 1.0 });
    }
    if resamples == 0 {
        return Err(Error::Input("bootstrap needs at least 1 resample".into()));
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut acc = 0.0;
        for _ in 0..n {
            acc += samples[rng.gen_range(0..n)];
        }
        means.push(acc / n as f64);
    }
    means.sort_by(|a, b| a.partial_cmp(b).expect("finite means"));
    let alpha = 1.0 - confidence;
    Ok(BootstrapResult {
        mean,
        ci_low: quantile_sorted(&means, alpha / 2.0),
        ci_high: quantile_sorted(&means, 1.0 - alpha / 2.0),
        confidence,
        resamples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn degenerate_samples_give_point_interval() {
        let r = bootstrap_mean_ci(&[3.25; 40], 0.99, 500, 7).unwrap();
        assert_eq!(r.mean, 3.25);
        assert_eq!(r.ci_low, 3.25);
        assert_eq!(r.ci_high, 3.25);
    }

    #[test]
    fn deterministic_given_seed() {
        let data: Vec<f64> = (0..50).map(|i| (i as f64 * 0.77).sin()).collect();
        let a = bootstrap_mean_ci(&data, 0.99, 2000, 42).unwrap();
        let b = bootstrap_mean_ci(&data, 0.99, 2000, 42).unwrap();
        assert_eq!(a, b);
        let c = bootstrap_mean_ci(&data, 0.99, 2000, 43).unwrap();
        assert!(a.ci_low != c.ci_low || a.ci_high != c.ci_high);
    }

    #[test]
    fn interval_brackets_the_mean() {
        let data: Vec<f64> = (0..70).map(|i| 1.0 + 0.1 * ((i * 37 % 11) as f64 - 5.0)).collect();
        let r = bootstrap_mean_ci(&data, 0.99, 3000, 11).unwrap();
        assert!(r.ci_low <= r.mean && r.mean <= r.ci_high);
        assert!(r.ci_high > r.ci_low);
    }

    #[test]
    fn input_validation() {
        assert!(bootstrap_mean_ci(&[1.0], 0.99, 100, 0).is_err());
        assert!(bootstrap_mean_ci(&[1.0, 2.0], 1.0, 100, 0).is_err());
        assert!(bootstrap_mean_ci(&[1.0, 2.0], 0.0, 100, 0).is_err());
        assert!(bootstrap_mean_ci(&[1.0, 2.0], 0.99, 0, 0).is_err());
        assert!(bootstrap_mean_ci(&[1.0, f64::NAN], 0.99, 100, 0).is_err());
    }

    #[test]
    fn coverage_of_true_mean_matches_nominal_level() {
        // Monte Carlo oracle: draw n = 70 from N(2, 0.5), build a 99% CI,
        // count how often it covers the true mean.
        let true_mean = 2.0;
        let normal = Normal::new(true_mean, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(987);
        let reps = 1000;
        let mut covered = 0;
        for rep in 0..reps {
            let data: Vec<f64> = (0..70).map(|_| normal.sample(&mut rng)).collect();
            let r = bootstrap_mean_ci(&data, 0.99, 2000, 1000 + rep).unwrap();
            if r.ci_low <= true_mean && true_mean <= r.ci_high {
                covered += 1;
            }
        }
        let coverage = covered as f64 / reps as f64;
        assert!((0.97..=1.0).contains(&coverage), "coverage = {coverage}");
    }

    #[test]
    fn doubling_resamples_barely_moves_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<f64> = (0..70).map(|_| rng.gen_range(0.0..1.0)).collect();
        let a = bootstrap_mean_ci(&data, 0.99, 10_000, 21).unwrap();
        let b = bootstrap_mean_ci(&data, 0.99, 20_000, 21).unwrap();
        let width = a.ci_high - a.ci_low;
        assert!((a.ci_low - b.ci_low).abs() <= 0.01 * width, "low endpoint drifted");
        assert!((a.ci_high - b.ci_high).abs() <= 0.01 * width, "high endpoint drifted");
    }

    #[test]
    fn quantiles_interpolate_linearly() {
        let sorted = [0.0, 1.0, 2.0, 3.0];
        assert_relative_eq!(quantile_sorted(&sorted, 0.0), 0.0);
        assert_relative_eq!(quantile_sorted(&sorted, 1.0), 3.0);
        assert_relative_eq!(quantile_sorted(&sorted, 0.5), 1.5);
        assert_relative_eq!(quantile_sorted(&sorted, 1.0 / 3.0), 1.0);
    }
}
