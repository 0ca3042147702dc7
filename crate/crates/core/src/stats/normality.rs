//! Empirical distances to the standard normal law after standardization by
//! the sample mean and sample standard deviation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub const MIN_SAMPLES: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalityMetrics {
    pub n: usize,
    pub kolmogorov: f64,
    pub wasserstein1: f64,
}

impl NormalityMetrics {
    /// Empirical `δ_N = W + K`.
    pub fn delta(&self) -> f64 {
        self.kolmogorov + self.wasserstein1
    }
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Sorted standardized samples.
pub fn standardize(samples: &[f64]) -> Result<Vec<f64>> {
    let n = samples.len();
    if n < MIN_SAMPLES {
        return Err(Error::InsufficientSamples { required: MIN_SAMPLES, got: n });
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite sample".into()));
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let scale = samples.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    if !(var.sqrt() > 1e-14 * scale) {
        return Err(Error::DegenerateSample);
    }
    let sd = var.sqrt();
    let mut z: Vec<f64> = samples.iter().map(|v| (v - mean) / sd).collect();
    z.sort_by(f64::total_cmp);
    Ok(z)
}

fn metrics_sorted(z: &[f64], normal: &Normal) -> NormalityMetrics {
    let n = z.len();
    let nf = n as f64;
    let mut k: f64 = 0.0;
    let mut w = 0.0;
    for (idx, &v) in z.iter().enumerate() {
        let cdf = normal.cdf(v);
        k = k.max((idx as f64 + 1.0) / nf - cdf).max(cdf - idx as f64 / nf);
        w += (v - normal.inverse_cdf((idx as f64 + 0.5) / nf)).abs();
    }
    NormalityMetrics { n, kolmogorov: k, wasserstein1: w / nf }
}

/// Kolmogorov distance (sup-gap at the jumps of the empirical CDF) and the
/// Wasserstein-1 distance at plotting positions `(k - 1/2)/n`.
pub fn normality_metrics(samples: &[f64]) -> Result<NormalityMetrics> {
    let z = standardize(samples)?;
    Ok(metrics_sorted(&z, &standard_normal()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapInterval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub resamples: usize,
}

/// Percentile bootstrap interval for `δ_N`. Deterministic given `seed`.
pub fn delta_bootstrap(
    samples: &[f64],
    resamples: usize,
    level: f64,
    seed: u64,
) -> Result<BootstrapInterval> {
    if !(level > 0.0 && level < 1.0) || resamples < 2 {
        return Err(Error::InvalidInput("bootstrap needs 0 < level < 1 and ≥ 2 resamples".into()));
    }
    let estimate = normality_metrics(samples)?.delta();
    let normal = standard_normal();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = samples.len();
    let mut buf = vec![0.0; n];
    let mut deltas = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for v in buf.iter_mut() {
            *v = samples[rng.random_range(0..n)];
        }
        match standardize(&buf) {
            Ok(z) => deltas.push(metrics_sorted(&z, &normal).delta()),
            Err(Error::DegenerateSample) => continue,
            Err(e) => return Err(e),
        }
    }
    if deltas.is_empty() {
        return Err(Error::DegenerateSample);
    }
    deltas.sort_by(f64::total_cmp);
    let pick = |q: f64| deltas[((q * deltas.len() as f64).floor() as usize).min(deltas.len() - 1)];
    let tail = (1.0 - level) / 2.0;
    Ok(BootstrapInterval {
        estimate,
        lower: pick(tail),
        upper: pick(1.0 - tail),
        level,
        resamples,
    })
}
