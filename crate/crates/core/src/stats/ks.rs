use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub n_samples: usize,
}

/// CDF of `N(0, variance)`.
pub fn normal_cdf(x: f64, variance: f64) -> f64 {
    0.5 * erfc(-x / (2.0 * variance).sqrt())
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `samples` and
/// the `N(0, variance)` CDF.
pub fn ks_normality(samples: &[f64], variance: f64) -> Result<KsResult> {
    if !(variance > 0.0) {
        return Err(invalid("variance", format!("must be positive, got {variance}")));
    }
    if samples.len() < 100 {
        return Err(invalid("samples", format!("need at least 100, got {}", samples.len())));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf(x, variance);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    Ok(KsResult {
        statistic,
        n_samples: samples.len(),
    })
}
