use crate::error::{invalid, Error, Result};

pub const DEFAULT_STEP: f64 = 1e-5;

/// Central-difference gradient `(f(x + h e_i) - f(x - h e_i)) / 2h`.
pub fn finite_diff_gradient<F>(f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    if !(h > 0.0) {
        return Err(invalid("h", format!("step must be positive, got {h}")));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite("finite-difference objective"));
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// Second difference `(f(x + hv) - 2f(x) + f(x - hv)) / h²` along `v`.
pub fn second_directional_difference<F>(f: F, x: &[f64], v: &[f64], h: f64) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let plus: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + h * b).collect();
    let minus: Vec<f64> = x.iter().zip(v).map(|(a, b)| a - h * b).collect();
    (f(&plus) - 2.0 * f(x) + f(&minus)) / (h * h)
}

/// Largest relative deviation `|a - b| / max(|b|, floor)` over coordinates.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(floor))
        .fold(0.0, f64::max)
}
