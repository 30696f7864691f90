use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Bin {
    pub left: f64,
    pub right: f64,
    pub count: usize,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum HistogramError {
    #[error("histogram needs at least one sample")]
    Empty,
    #[error("histogram needs at least one bin")]
    NoBins,
    #[error("histogram samples must be finite")]
    NonFinite,
}

/// Equal-width bins spanning `[min, max]`; the last bin is closed. Constant
/// samples all land in the first bin.
pub fn emit_histogram(samples: &[f64], bin_count: usize) -> Result<Vec<Bin>, HistogramError> {
    if samples.is_empty() {
        return Err(HistogramError::Empty);
    }
    if bin_count == 0 {
        return Err(HistogramError::NoBins);
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(HistogramError::NonFinite);
    }
    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bin_count as f64;
    let mut counts = vec![0usize; bin_count];
    for &x in samples {
        let idx = if width > 0.0 {
            (((x - lo) / width) as usize).min(bin_count - 1)
        } else {
            0
        };
        counts[idx] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| Bin {
            left: lo + i as f64 * width,
            right: if i + 1 == bin_count { hi } else { lo + (i + 1) as f64 * width },
            count,
        })
        .collect())
}
